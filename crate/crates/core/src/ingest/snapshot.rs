use serde::Deserialize;
use serde_json::{json, Value};

use super::{IngestError, Ingestor};
use crate::model::{Proposal, Source};

pub const SNAPSHOT_PROPOSALS_QUERY: &str = "query Proposals($space: String!, $first: Int!, $skip: Int!) {
  space(id: $space) { id }
  proposals(first: $first, skip: $skip, where: { space: $space }, orderBy: \"created\", orderDirection: desc) {
    id
    title
    body
    created
    link
    space { id }
  }
}";

/// Opaque pagination token for Snapshot listings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SnapshotCursor(String);

impl SnapshotCursor {
    fn from_skip(skip: u64) -> Self {
        Self(format!("skip:{skip}"))
    }

    fn skip(&self) -> Result<u64, IngestError> {
        self.0
            .strip_prefix("skip:")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IngestError::InvalidConfig(format!("bad cursor {:?}", self.0)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn parse(token: &str) -> Result<Self, IngestError> {
        let cursor = Self(token.to_string());
        cursor.skip()?;
        Ok(cursor)
    }
}

/// GraphQL request body for one page of a space's proposals.
pub fn snapshot_request_body(space: &str, first: u32, skip: u64) -> Value {
    json!({
        "query": SNAPSHOT_PROPOSALS_QUERY,
        "variables": { "space": space, "first": first, "skip": skip },
    })
}

#[derive(Deserialize)]
struct Envelope {
    data: Option<Data>,
    #[serde(default)]
    errors: Vec<GraphQlError>,
}

#[derive(Deserialize)]
struct GraphQlError {
    message: String,
}

#[derive(Deserialize)]
struct Data {
    // `Some(Null)` when the hub answered but has no such space; `None`
    // when the field was not part of the answer at all.
    #[serde(default, deserialize_with = "present")]
    space: Option<Value>,
    proposals: Option<Vec<Node>>,
}

fn present<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
    Value::deserialize(d).map(Some)
}

#[derive(Deserialize)]
struct Node {
    id: String,
    title: String,
    #[serde(default)]
    body: Option<String>,
    created: i64,
    #[serde(default)]
    link: Option<String>,
    #[serde(default)]
    space: Option<SpaceRef>,
}

#[derive(Deserialize)]
struct SpaceRef {
    id: String,
}

impl Ingestor<'_> {
    /// Fetches one page of proposals for `space`, newest first.
    pub fn fetch_snapshot_proposals(
        &self,
        space: &str,
        cursor: Option<&SnapshotCursor>,
    ) -> Result<(Vec<Proposal>, Option<SnapshotCursor>), IngestError> {
        if space.trim().is_empty() {
            return Err(IngestError::InvalidConfig("space must not be empty".into()));
        }
        let skip = cursor.map(SnapshotCursor::skip).transpose()?.unwrap_or(0);
        let first = self.config.page_size;
        let body = snapshot_request_body(space, first, skip);
        let envelope: Envelope = self.post_json(&self.config.snapshot_endpoint, &body)?;

        let data = match envelope.data {
            Some(d) => d,
            None if !envelope.errors.is_empty() => {
                let messages: Vec<_> = envelope.errors.into_iter().map(|e| e.message).collect();
                return Err(IngestError::MalformedResponse(messages.join("; ")));
            }
            None => return Err(IngestError::MalformedResponse("missing data".into())),
        };
        if matches!(data.space, Some(Value::Null)) {
            return Err(IngestError::UnknownSpace(space.to_string()));
        }
        let nodes = data
            .proposals
            .ok_or_else(|| IngestError::MalformedResponse("missing proposals".into()))?;

        let fetched = nodes.len();
        let mut proposals = nodes
            .into_iter()
            .map(|node| to_proposal(space, node))
            .collect::<Result<Vec<_>, _>>()?;
        proposals.sort_by_key(|p| std::cmp::Reverse(p.created_at));

        let next = (fetched as u64 == u64::from(first))
            .then(|| SnapshotCursor::from_skip(skip + fetched as u64));
        Ok((proposals, next))
    }

    /// Follows cursors until the listing is exhausted.
    pub fn fetch_all_snapshot(&self, space: &str) -> Result<Vec<Proposal>, IngestError> {
        let mut all = Vec::new();
        let mut cursor = None;
        loop {
            let (page, next) = self.fetch_snapshot_proposals(space, cursor.as_ref())?;
            all.extend(page);
            match next {
                Some(c) => cursor = Some(c),
                None => return Ok(all),
            }
        }
    }
}

fn to_proposal(requested_space: &str, node: Node) -> Result<Proposal, IngestError> {
    let created_at = chrono::DateTime::from_timestamp(node.created, 0).ok_or_else(|| {
        IngestError::MalformedResponse(format!("proposal {}: bad timestamp", node.id))
    })?;
    let proposal = Proposal {
        space: node
            .space
            .map(|s| s.id)
            .unwrap_or_else(|| requested_space.to_string()),
        source: Source::Snapshot,
        title: node.title,
        body: node.body.unwrap_or_default(),
        created_at,
        url: node.link.filter(|l| !l.is_empty()),
        id: node.id,
    };
    proposal
        .validate()
        .map_err(|e| IngestError::MalformedResponse(e.to_string()))?;
    Ok(proposal)
}
