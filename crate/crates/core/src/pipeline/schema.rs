use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PipelineError;

/// The nine agriculture data domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Crop,
    Weather,
    Soil,
    Pest,
    Fertilizer,
    Productivity,
    Irrigation,
    Cattle,
    Equipment,
}

impl Domain {
    pub const ALL: [Domain; 9] = [
        Domain::Crop,
        Domain::Weather,
        Domain::Soil,
        Domain::Pest,
        Domain::Fertilizer,
        Domain::Productivity,
        Domain::Irrigation,
        Domain::Cattle,
        Domain::Equipment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Crop => "crop",
            Domain::Weather => "weather",
            Domain::Soil => "soil",
            Domain::Pest => "pest",
            Domain::Fertilizer => "fertilizer",
            Domain::Productivity => "productivity",
            Domain::Irrigation => "irrigation",
            Domain::Cattle => "cattle",
            Domain::Equipment => "equipment",
        }
    }

    /// Canonical attribute names collected for each domain.
    pub fn standard_attributes(self) -> &'static [&'static str] {
        match self {
            Domain::Crop => &[
                "CropId",
                "Name",
                "Type",
                "Soil Moisture",
                "Temperature",
                "Season",
                "Avg. Productivity",
                "Min Land",
                "Growing Period",
                "Seed Type",
                "Price",
                "Quantity",
                "Disease",
                "Treatment",
            ],
            Domain::Weather => &[
                "Humidity",
                "Temperature",
                "Pressure",
                "Wind Speed",
                "Rainfall",
                "Location",
            ],
            Domain::Soil => &[
                "Bulk Density",
                "Inorganic Material",
                "Organic Material",
                "Water",
                "Air",
                "Color",
                "Texture",
                "Structure",
                "Infiltration",
            ],
            Domain::Pest => &[
                "Type",
                "Effect",
                "Treatment",
                "Solubility In Water",
                "Outcome",
                "Price",
            ],
            Domain::Fertilizer => &["Type", "Nutrient Composition", "Price"],
            Domain::Productivity => &[
                "Soil Type",
                "Crop Type",
                "Season",
                "Rainfall",
                "Pest Info",
                "Fertilizer Info",
                "Irrigation Info",
            ],
            Domain::Irrigation => &["Climate Factors", "Crop Type", "Season", "Soil Type"],
            Domain::Cattle => &[
                "Type",
                "Quantity",
                "Area",
                "Layout",
                "Structure of Yard",
                "Feed",
                "Drinking Water",
                "Health Issue",
                "Disease",
                "Treatment",
            ],
            Domain::Equipment => &[
                "Type",
                "Quantity",
                "Area",
                "Budget",
                "Price",
                "Maintenance Cost",
                "Work Type",
            ],
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        let key = key.strip_suffix(" info").unwrap_or(&key);
        Domain::ALL
            .into_iter()
            .find(|d| d.as_str() == key)
            .ok_or_else(|| PipelineError::UnknownDomain(s.to_string()))
    }
}

/// Value type and admissible range of one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeKind {
    Numeric {
        min: f64,
        max: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unit: Option<String>,
    },
    /// Tokens are encoded by their position in this list.
    Categorical { tokens: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl AttributeSpec {
    pub fn numeric(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: AttributeKind::Numeric {
                min,
                max,
                unit: None,
            },
        }
    }

    pub fn categorical(name: &str, tokens: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: AttributeKind::Categorical {
                tokens: tokens.iter().map(|t| t.to_string()).collect(),
            },
        }
    }

    pub fn token_index(&self, token: &str) -> Option<usize> {
        match &self.kind {
            AttributeKind::Categorical { tokens } => tokens.iter().position(|t| t == token),
            AttributeKind::Numeric { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub domain: Domain,
    pub attributes: Vec<AttributeSpec>,
}

/// Declared attributes for every domain the dataset uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub domains: Vec<DomainSchema>,
}

const STANDARD_SCHEMA_JSON: &str = include_str!("../../data/standard_schema.json");

impl Schema {
    /// The bundled schema covering all nine domains.
    pub fn standard() -> Self {
        Self::from_json(STANDARD_SCHEMA_JSON).expect("bundled schema is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let schema: Schema =
            serde_json::from_str(text).map_err(|e| PipelineError::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    /// Checks that every declared attribute belongs to its domain's canonical
    /// attribute set, that names are unique and that ranges are well formed.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut seen_domains = Vec::new();
        for ds in &self.domains {
            if seen_domains.contains(&ds.domain) {
                return Err(PipelineError::Schema(format!(
                    "domain {} declared twice",
                    ds.domain
                )));
            }
            seen_domains.push(ds.domain);
            let canonical = ds.domain.standard_attributes();
            for (i, attr) in ds.attributes.iter().enumerate() {
                if !canonical.contains(&attr.name.as_str()) {
                    return Err(PipelineError::Schema(format!(
                        "attribute {:?} is not part of the {} domain",
                        attr.name, ds.domain
                    )));
                }
                if ds.attributes[..i].iter().any(|a| a.name == attr.name) {
                    return Err(PipelineError::Schema(format!(
                        "attribute {:?} declared twice in {}",
                        attr.name, ds.domain
                    )));
                }
                match &attr.kind {
                    AttributeKind::Numeric { min, max, .. } => {
                        if !(min.is_finite() && max.is_finite() && min <= max) {
                            return Err(PipelineError::Schema(format!(
                                "attribute {:?} has invalid range [{min}, {max}]",
                                attr.name
                            )));
                        }
                    }
                    AttributeKind::Categorical { tokens } => {
                        if tokens.is_empty() {
                            return Err(PipelineError::Schema(format!(
                                "attribute {:?} declares no tokens",
                                attr.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self, domain: Domain) -> Option<&DomainSchema> {
        self.domains.iter().find(|d| d.domain == domain)
    }

    pub fn attribute(&self, domain: Domain, name: &str) -> Option<&AttributeSpec> {
        self.domain(domain)?.attributes.iter().find(|a| a.name == name)
    }

    /// Position of a domain in declaration order; used to order matrix rows.
    pub fn domain_rank(&self, domain: Domain) -> Option<usize> {
        self.domains.iter().position(|d| d.domain == domain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_schema_covers_all_domains() {
        let s = Schema::standard();
        for d in Domain::ALL {
            let ds = s.domain(d).expect("domain present");
            assert_eq!(ds.attributes.len(), d.standard_attributes().len());
        }
    }

    #[test]
    fn domain_parsing_accepts_info_suffix() {
        assert_eq!("Crop Info".parse::<Domain>().unwrap(), Domain::Crop);
        assert_eq!("weather".parse::<Domain>().unwrap(), Domain::Weather);
        assert!("orchard".parse::<Domain>().is_err());
    }

    #[test]
    fn rejects_attribute_outside_domain() {
        let s = Schema {
            domains: vec![DomainSchema {
                domain: Domain::Fertilizer,
                attributes: vec![AttributeSpec::numeric("Humidity", 0.0, 100.0)],
            }],
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn attribute_spec_json_shape() {
        let a = AttributeSpec::categorical("Season", &["Kharif", "Rabi"]);
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(
            text,
            r#"{"name":"Season","kind":"categorical","tokens":["Kharif","Rabi"]}"#
        );
    }
}
