//! The curated proposal categories and the taxonomy document format.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One of the seven curated proposal categories.
///
/// Declaration order is the canonical order used for prompts, score maps,
/// tie-breaking and every export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CategoryCode {
    #[serde(rename = "TAM")]
    Tam,
    #[serde(rename = "PRM")]
    Prm,
    #[serde(rename = "PFU")]
    Pfu,
    #[serde(rename = "GAFM")]
    Gafm,
    #[serde(rename = "BAWM")]
    Bawm,
    #[serde(rename = "PED")]
    Ped,
    #[serde(rename = "MISC")]
    Misc,
}

impl CategoryCode {
    pub const ALL: [CategoryCode; 7] = [
        CategoryCode::Tam,
        CategoryCode::Prm,
        CategoryCode::Pfu,
        CategoryCode::Gafm,
        CategoryCode::Bawm,
        CategoryCode::Ped,
        CategoryCode::Misc,
    ];

    pub const COUNT: usize = 7;

    pub fn as_str(self) -> &'static str {
        match self {
            CategoryCode::Tam => "TAM",
            CategoryCode::Prm => "PRM",
            CategoryCode::Pfu => "PFU",
            CategoryCode::Gafm => "GAFM",
            CategoryCode::Bawm => "BAWM",
            CategoryCode::Ped => "PED",
            CategoryCode::Misc => "MISC",
        }
    }

    /// Position in canonical order, `0..7`.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CategoryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown category code {0:?}")]
pub struct UnknownCategoryCode(pub String);

impl FromStr for CategoryCode {
    type Err = UnknownCategoryCode;

    /// Accepts the code in any letter case, surrounding whitespace ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        CategoryCode::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(trimmed))
            .ok_or_else(|| UnknownCategoryCode(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDefinition {
    pub code: CategoryCode,
    pub name: String,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub version: u32,
    pub definitions: Vec<CategoryDefinition>,
}

/// Structural problems with a taxonomy, either found while loading a
/// document or reported by [`validate_taxonomy`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("taxonomy document is malformed: {0}")]
    Syntax(String),
    #[error("unknown category code {0:?}")]
    UnknownCode(String),
    #[error("missing categories: {0:?}")]
    MissingCategory(Vec<CategoryCode>),
    #[error("category {0} defined more than once")]
    DuplicateCategory(CategoryCode),
    #[error("category {0} has an empty explanation")]
    EmptyExplanation(CategoryCode),
    #[error("category {0} has an empty name")]
    EmptyName(CategoryCode),
    #[error("categories are not in canonical order")]
    OutOfOrder,
}

/// Version number of the built-in taxonomy.
pub const BUILTIN_VERSION: u32 = 7;

const BUILTIN_DEFINITIONS: [(CategoryCode, &str, &str); 7] = [
    (
        CategoryCode::Tam,
        "Treasury and Asset Management",
        "Oversee the DAO's own treasury and assets. This encompasses decisions concerning the security, investment, diversification, and financial reporting of the DAO's own assets, as well as managing associated risks. In this context, the DAO is the asset owner, and these assets form part of its treasury. This also includes potential airdrops that the DAO could receive.",
    ),
    (
        CategoryCode::Prm,
        "Protocol Risk Management",
        "Manage operational, technical, liquidity, and other risks related to the protocol or the assets held within the protocol. It also includes Risk and Parameter Reports and Updates related to managing the protocol risk. Responsibilities include adjusting protocol parameters (also referred to as risk parameters), enlisting or delisting assets, ensuring the safety of value and assets locked in the protocol, identifying potential attack vectors, addressing risks inherent to protocol operations, rectifying technical vulnerabilities, and navigating specific ecosystem or contextual threats (which encompasses regulatory and legal risk management).",
    ),
    (
        CategoryCode::Pfu,
        "Protocol Features and Utility",
        "Enhance and oversee the protocol's functionalities and utility. Responsibilities encompass developing and deploying new code, implementing protocol upgrades, launching new products, deploying new gauges, implementing liquidity mining programs, implementing protocol incentives, expanding the core protocol to additional chains and Layer 2 solutions, and managing the utility of the protocol's native token(s).",
    ),
    (
        CategoryCode::Gafm,
        "Governance Administration and Framework Management",
        "Covers proposals that direct the governance process by refining and standardizing the governance framework, rules, processes, templates, and timelines. It also includes Governance Reports and Updates regarding to Governance. Responsibilities encompass defining roles, managing voting mechanisms and parameters, setting eligibility criteria for voting power, whitelisting tokens into voting escrows and governance contracts, managing Snapshot space and configurations, and determining quorum thresholds. Additionally, this vertical addresses proposals that create or iterate upon processes for onboarding and offboarding roles and entities vital to governance operations, such as service providers, facilitators, working groups, and councils.",
    ),
    (
        CategoryCode::Bawm,
        "Budget Allocation and Work Management",
        "Covers proposals that allocate the DAO's budget to internal DAO projects, tasks, and roles requiring execution or oversight. These initiatives may be singular projects or ongoing operations. It includes Community Updates from service providers that keep the DAO informed on various activities, excluding Governance Reports, Financial Reports, and Risk and Parameter Reports. It identifies service providers, individuals, or teams who take on these responsibilities and carry them out according to the defined Scope of Work and designated deliverables. This ensures the efficient utilization of resources in alignment with the DAO's strategic goals and operational demands. This encompasses the allocation and management of duties and work related to marketing, operations, software development, and risk and financial management.",
    ),
    (
        CategoryCode::Ped,
        "Partnerships and Ecosystem Development",
        "Encompasses proposals aimed at driving external growth via strategic partnerships and multifaceted strategies. The focus is on bolstering the DAO/protocol ecosystem through the formation and maintenance of partnerships, launching educational campaigns, overseeing grant programs, engaging in regulatory and legal activism, contributing resources to external foundations that contribute to wider ecosystem development, and allocating budgets to external software development projects that build upon the core systems of the protocol. Additionally, it emphasizes initiatives designed to keep or/and draw more participants into the protocol ecosystem, such as making airdrops and making users whole in front of eventualities. Also Includes activities that foster community spirit and engagement, such as meetups, social media interactions, content creation, and other forms of outreach that do not explicitly fall under marketing or partnerships. Also covers Informative materials and discussions aimed at improving the knowledge base of the DAO's community members regarding blockchain, the protocol's features, and best practices within the space. Furthermore, includes recognizing and managing the contributions that do not directly impact governance but contribute to the health and growth of the DAO's ecosystem, such as voluntary community moderation, unsolicited user-generated content, and miscellaneous feedback.",
    ),
    (
        CategoryCode::Misc,
        "Miscellaneous",
        "Comprehensive umbrella for activities, requests, and contributions that fall outside the predefined governance verticals or are tangential to governance yet are contribute to the DAO's operations. It includes support requests for technical assistance and user troubleshooting, addresses general inquiries about the DAO and its operations, and translation of important documentation to other languages.",
    ),
];

/// The seven built-in category definitions, in canonical order.
pub fn builtin_taxonomy_v7() -> Taxonomy {
    Taxonomy {
        version: BUILTIN_VERSION,
        definitions: BUILTIN_DEFINITIONS
            .iter()
            .map(|(code, name, explanation)| CategoryDefinition {
                code: *code,
                name: (*name).to_string(),
                explanation: (*explanation).to_string(),
            })
            .collect(),
    }
}

/// Checks every structural invariant and reports all violations at once.
pub fn validate_taxonomy(taxonomy: &Taxonomy) -> Result<(), Vec<TaxonomyError>> {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for def in &taxonomy.definitions {
        if !seen.insert(def.code) {
            violations.push(TaxonomyError::DuplicateCategory(def.code));
        }
        if def.name.trim().is_empty() {
            violations.push(TaxonomyError::EmptyName(def.code));
        }
        if def.explanation.trim().is_empty() {
            violations.push(TaxonomyError::EmptyExplanation(def.code));
        }
    }
    let missing: Vec<CategoryCode> = CategoryCode::ALL
        .into_iter()
        .filter(|c| !seen.contains(c))
        .collect();
    if !missing.is_empty() {
        violations.push(TaxonomyError::MissingCategory(missing));
    }
    if !taxonomy
        .definitions
        .windows(2)
        .all(|w| w[0].code < w[1].code)
        && !violations
            .iter()
            .any(|v| matches!(v, TaxonomyError::DuplicateCategory(_)))
    {
        violations.push(TaxonomyError::OutOfOrder);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Deserialize)]
struct RawDocument {
    version: u32,
    #[serde(default)]
    categories: Vec<RawCategory>,
}

#[derive(Deserialize)]
struct RawCategory {
    code: String,
    name: String,
    explanation: String,
}

#[derive(Serialize)]
struct DocumentOut<'a> {
    version: u32,
    categories: &'a [CategoryDefinition],
}

/// Parses a TOML taxonomy document:
///
/// ```toml
/// version = 8
///
/// [[categories]]
/// code = "TAM"
/// name = "Treasury and Asset Management"
/// explanation = "..."
/// ```
///
/// Categories may be listed in any order; the result is canonically ordered.
pub fn load_taxonomy(document: &str) -> Result<Taxonomy, TaxonomyError> {
    let raw: RawDocument =
        toml::from_str(document).map_err(|e| TaxonomyError::Syntax(e.message().to_string()))?;
    let mut definitions = Vec::with_capacity(raw.categories.len());
    for cat in raw.categories {
        let code = cat
            .code
            .parse::<CategoryCode>()
            .map_err(|e| TaxonomyError::UnknownCode(e.0))?;
        definitions.push(CategoryDefinition {
            code,
            name: cat.name,
            explanation: cat.explanation,
        });
    }
    // stable: duplicates stay adjacent and are reported below
    definitions.sort_by_key(|d| d.code);
    let taxonomy = Taxonomy {
        version: raw.version,
        definitions,
    };
    match validate_taxonomy(&taxonomy) {
        Ok(()) => Ok(taxonomy),
        Err(mut violations) => Err(violations.remove(0)),
    }
}

/// Serializes a taxonomy into the document format read by [`load_taxonomy`].
pub fn taxonomy_document(taxonomy: &Taxonomy) -> String {
    toml::to_string_pretty(&DocumentOut {
        version: taxonomy.version,
        categories: &taxonomy.definitions,
    })
    .expect("taxonomy serializes to TOML")
}

impl Taxonomy {
    pub fn definition(&self, code: CategoryCode) -> Option<&CategoryDefinition> {
        self.definitions.iter().find(|d| d.code == code)
    }
}
