use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CrowdError;

/// A simulated respondent.
///
/// With probability `attention` the persona reasons from the survey's
/// descriptive statistics; otherwise it answers at random. `category_bias`
/// holds log-odds offsets keyed by category label (matched ignoring case),
/// `shift` is added to attentive continuous answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    pub attention: f64,
    pub noise_sd_scale: f64,
    #[serde(default)]
    pub category_bias: BTreeMap<String, f64>,
    #[serde(default)]
    pub shift: f64,
    pub respects_constraints: bool,
}

impl Persona {
    pub fn validate(&self) -> Result<(), CrowdError> {
        if !(0.0..=1.0).contains(&self.attention) {
            return Err(CrowdError::InvalidPersona(format!("{}: attention must lie in [0, 1]", self.name)));
        }
        if !(self.noise_sd_scale > 0.0 && self.noise_sd_scale.is_finite()) {
            return Err(CrowdError::InvalidPersona(format!("{}: noise_sd_scale must be positive", self.name)));
        }
        if !self.shift.is_finite() || self.category_bias.values().any(|b| !b.is_finite()) {
            return Err(CrowdError::InvalidPersona(format!("{}: biases must be finite", self.name)));
        }
        Ok(())
    }

    pub fn bias_for(&self, label: &str) -> f64 {
        self.category_bias
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(label))
            .map_or(0.0, |(_, b)| *b)
    }

    /// Untrained workers without input checks: mostly random answers with a
    /// strong lean toward "male".
    pub fn novice_unconstrained() -> Self {
        Self {
            name: "novice-unconstrained".into(),
            attention: 0.1,
            noise_sd_scale: 2.0,
            category_bias: BTreeMap::from([("male".to_string(), 1.6)]),
            shift: 0.0,
            respects_constraints: false,
        }
    }

    /// Same crowd with the input range enforced by the form.
    pub fn novice_constrained() -> Self {
        Self {
            name: "novice-constrained".into(),
            attention: 0.2,
            noise_sd_scale: 2.0,
            category_bias: BTreeMap::from([("male".to_string(), 1.12)]),
            shift: 6.0,
            respects_constraints: true,
        }
    }

    /// Highest-experience workers: attentive, with a residual lean toward
    /// "male" and toward older ages.
    pub fn experienced() -> Self {
        Self {
            name: "experienced".into(),
            attention: 0.9,
            noise_sd_scale: 1.0,
            category_bias: BTreeMap::from([("male".to_string(), 0.7)]),
            shift: 1.7,
            respects_constraints: true,
        }
    }

    /// Fully attentive, unbiased, noise as observed.
    pub fn ideal() -> Self {
        Self {
            name: "ideal".into(),
            attention: 1.0,
            noise_sd_scale: 1.0,
            category_bias: BTreeMap::new(),
            shift: 0.0,
            respects_constraints: true,
        }
    }

    pub fn presets() -> Vec<Persona> {
        vec![Self::novice_unconstrained(), Self::novice_constrained(), Self::experienced(), Self::ideal()]
    }

    pub fn preset(name: &str) -> Option<Persona> {
        Self::presets().into_iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixEntry {
    pub persona: Persona,
    pub weight: f64,
}

/// Weighted personas; each simulated worker draws its persona from the mix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PersonaMix {
    pub entries: Vec<MixEntry>,
}

impl PersonaMix {
    pub fn new(entries: Vec<MixEntry>) -> Result<Self, CrowdError> {
        if entries.is_empty() {
            return Err(CrowdError::InvalidMix("empty persona mix".into()));
        }
        for e in &entries {
            e.persona.validate()?;
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return Err(CrowdError::InvalidMix(format!("negative weight for {}", e.persona.name)));
            }
        }
        let total: f64 = entries.iter().map(|e| e.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(CrowdError::InvalidMix(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { entries })
    }

    pub fn single(persona: Persona) -> Result<Self, CrowdError> {
        Self::new(vec![MixEntry { persona, weight: 1.0 }])
    }

    /// Picks an entry from a uniform draw in `[0, 1)`.
    pub(crate) fn pick(&self, u: f64) -> &Persona {
        let mut acc = 0.0;
        for e in &self.entries {
            acc += e.weight;
            if u < acc {
                return &e.persona;
            }
        }
        &self.entries.iter().rev().find(|e| e.weight > 0.0).unwrap_or(&self.entries[0]).persona
    }
}

#[derive(Debug, Clone, Deserialize)]
struct MixRef {
    persona: String,
    weight: f64,
}

/// Persona config file: extra persona definitions plus the mix, which may
/// name presets or the extra personas.
///
/// ```json
/// { "personas": [{"name": "careful", "attention": 0.95, "noise_sd_scale": 0.8, "respects_constraints": true}],
///   "mix": [{"persona": "experienced", "weight": 0.7}, {"persona": "careful", "weight": 0.3}] }
/// ```
#[derive(Debug, Clone, Deserialize)]
pub struct PersonaConfig {
    #[serde(default)]
    personas: Vec<Persona>,
    mix: Vec<MixRef>,
}

impl PersonaConfig {
    pub fn from_json(text: &str) -> Result<PersonaMix, CrowdError> {
        let cfg: PersonaConfig = serde_json::from_str(text).map_err(|e| CrowdError::InvalidMix(e.to_string()))?;
        cfg.resolve()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PersonaMix, CrowdError> {
        let text = std::fs::read_to_string(path).map_err(|e| CrowdError::InvalidMix(e.to_string()))?;
        Self::from_json(&text)
    }

    fn resolve(self) -> Result<PersonaMix, CrowdError> {
        let entries = self
            .mix
            .into_iter()
            .map(|r| {
                let persona = self
                    .personas
                    .iter()
                    .find(|p| p.name == r.persona)
                    .cloned()
                    .or_else(|| Persona::preset(&r.persona))
                    .ok_or_else(|| CrowdError::InvalidMix(format!("unknown persona '{}'", r.persona)))?;
                Ok(MixEntry { persona, weight: r.weight })
            })
            .collect::<Result<Vec<_>, CrowdError>>()?;
        PersonaMix::new(entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for p in Persona::presets() {
            p.validate().unwrap();
        }
        assert_eq!(Persona::experienced().bias_for("Male"), 0.7);
        assert_eq!(Persona::experienced().bias_for("female"), 0.0);
    }

    #[test]
    fn invalid_personas_and_mixes() {
        let mut p = Persona::ideal();
        p.attention = 1.5;
        assert!(p.validate().is_err());
        let mut p = Persona::ideal();
        p.noise_sd_scale = 0.0;
        assert!(p.validate().is_err());
        assert!(PersonaMix::new(vec![]).is_err());
        assert!(PersonaMix::new(vec![MixEntry { persona: Persona::ideal(), weight: 0.5 }]).is_err());
    }

    #[test]
    fn config_resolves_presets_and_custom() {
        let mix = PersonaConfig::from_json(
            r#"{"personas": [{"name": "careful", "attention": 0.95, "noise_sd_scale": 0.8, "respects_constraints": true}],
                "mix": [{"persona": "experienced", "weight": 0.7}, {"persona": "careful", "weight": 0.3}]}"#,
        )
        .unwrap();
        assert_eq!(mix.entries.len(), 2);
        assert_eq!(mix.pick(0.1).name, "experienced");
        assert_eq!(mix.pick(0.9).name, "careful");
        assert!(PersonaConfig::from_json(r#"{"mix": [{"persona": "nobody", "weight": 1}]}"#).is_err());
    }
}
