use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::{IngestError, Ingestor};
use crate::model::{Proposal, Source};

pub fn discourse_listing_url(base: &str, page: u32) -> String {
    format!("{}/latest.json?page={page}", base.trim_end_matches('/'))
}

pub fn discourse_topic_url(base: &str, topic_id: u64) -> String {
    format!(
        "{}/t/{topic_id}.json?include_raw=true",
        base.trim_end_matches('/')
    )
}

#[derive(Deserialize)]
struct Listing {
    topic_list: TopicList,
}

#[derive(Deserialize)]
struct TopicList {
    #[serde(default)]
    topics: Vec<TopicSummary>,
    #[serde(default)]
    more_topics_url: Option<String>,
}

#[derive(Deserialize)]
struct TopicSummary {
    id: u64,
    title: String,
    created_at: String,
    #[serde(default)]
    slug: Option<String>,
}

#[derive(Deserialize)]
struct TopicDetail {
    #[serde(default)]
    post_stream: Option<PostStream>,
}

#[derive(Deserialize)]
struct PostStream {
    #[serde(default)]
    posts: Vec<Post>,
}

#[derive(Deserialize)]
struct Post {
    #[serde(default)]
    raw: Option<String>,
    #[serde(default)]
    cooked: Option<String>,
}

impl Ingestor<'_> {
    /// Fetches page `page` of a forum's latest-topics listing, then each
    /// topic's first post. Returns the proposals and whether more pages exist.
    pub fn fetch_discourse_topics(
        &self,
        space: &str,
        page: u32,
    ) -> Result<(Vec<Proposal>, bool), IngestError> {
        let base = self
            .config
            .discourse_base_urls
            .get(space)
            .ok_or_else(|| IngestError::UnconfiguredSpace(space.to_string()))?;
        let listing: Listing = self.get_json(&discourse_listing_url(base, page))?;
        let has_more = listing.topic_list.more_topics_url.is_some();

        let mut proposals = Vec::with_capacity(listing.topic_list.topics.len());
        for topic in listing.topic_list.topics {
            let detail: TopicDetail = self.get_json(&discourse_topic_url(base, topic.id))?;
            let body = detail
                .post_stream
                .and_then(|s| s.posts.into_iter().next())
                .and_then(|p| p.raw.or(p.cooked))
                .unwrap_or_default();
            if body.is_empty() {
                tracing::warn!(space, topic = topic.id, "topic has an empty first post");
            }
            let created_at = parse_timestamp(&topic.created_at).ok_or_else(|| {
                IngestError::MalformedResponse(format!(
                    "topic {}: bad created_at {:?}",
                    topic.id, topic.created_at
                ))
            })?;
            let slug = topic.slug.unwrap_or_else(|| "-".to_string());
            let proposal = Proposal {
                id: format!("{space}/discourse/{}", topic.id),
                space: space.to_string(),
                source: Source::Discourse,
                title: topic.title,
                body,
                created_at,
                url: Some(format!(
                    "{}/t/{slug}/{}",
                    base.trim_end_matches('/'),
                    topic.id
                )),
            };
            proposal
                .validate()
                .map_err(|e| IngestError::MalformedResponse(e.to_string()))?;
            proposals.push(proposal);
        }
        Ok((proposals, has_more))
    }

    /// Reads pages from 0 until the listing reports no more, or
    /// `max_pages` pages have been read.
    pub fn fetch_all_discourse(
        &self,
        space: &str,
        max_pages: Option<u32>,
    ) -> Result<Vec<Proposal>, IngestError> {
        let mut all = Vec::new();
        let mut page = 0;
        loop {
            let (topics, has_more) = self.fetch_discourse_topics(space, page)?;
            all.extend(topics);
            page += 1;
            if !has_more || max_pages.is_some_and(|m| page >= m) {
                return Ok(all);
            }
        }
    }
}

/// RFC 3339 timestamp truncated to whole seconds in UTC.
fn parse_timestamp(text: &str) -> Option<DateTime<Utc>> {
    let parsed = DateTime::parse_from_rfc3339(text).ok()?;
    DateTime::from_timestamp(parsed.timestamp(), 0)
}
