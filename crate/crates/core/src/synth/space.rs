//! Parameter spaces and presets.
//!
//! Every parameter is stored as a class index. Continuous parameters are
//! quantized into `K` classes (64 by default) and decode to
//! `index / (K - 1)`; categorical parameters decode to their index.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::routing::{self, algorithm_topology};
use crate::{Error, Result};

pub const DEFAULT_CLASSES: usize = 64;
/// Coarse frequency ratios: 0.5, then 1 through 31.
pub const COARSE_RATIOS: usize = 32;
pub const ALGORITHM_SLOTS: usize = 32;

/// Per-operator parameter suffixes, in descriptor order.
pub const OPERATOR_PARAMS: [&str; 8] = [
    "ratio_coarse",
    "ratio_fine",
    "detune",
    "output_level",
    "attack",
    "decay",
    "sustain",
    "release",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Continuous,
    Categorical,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    /// Zero-based operator index.
    Operator(usize),
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterDescriptor {
    pub name: String,
    pub kind: ParamKind,
    pub class_count: usize,
    pub group: ParamGroup,
    pub fixed_value: Option<usize>,
}

impl ParameterDescriptor {
    pub fn continuous(name: impl Into<String>, classes: usize, group: ParamGroup) -> Self {
        ParameterDescriptor {
            name: name.into(),
            kind: ParamKind::Continuous,
            class_count: classes,
            group,
            fixed_value: None,
        }
    }

    pub fn categorical(name: impl Into<String>, classes: usize, group: ParamGroup) -> Self {
        ParameterDescriptor {
            kind: ParamKind::Categorical,
            ..Self::continuous(name, classes, group)
        }
    }

    pub fn fixed(name: impl Into<String>, classes: usize, group: ParamGroup, value: usize) -> Self {
        ParameterDescriptor {
            kind: ParamKind::Fixed,
            fixed_value: Some(value),
            ..Self::continuous(name, classes, group)
        }
    }

    pub fn is_free(&self) -> bool {
        self.kind != ParamKind::Fixed
    }

    /// `index / (class_count - 1)`, the unit-interval position of a class.
    pub fn unit(&self, index: usize) -> f64 {
        if self.class_count <= 1 {
            0.0
        } else {
            index as f64 / (self.class_count - 1) as f64
        }
    }

    /// Nearest class to a unit-interval value.
    pub fn class_for_unit(&self, value: f64) -> usize {
        let top = self.class_count.saturating_sub(1);
        ((value.clamp(0.0, 1.0) * top as f64).round() as usize).min(top)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DecodedValue {
    Unit(f64),
    Class(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    id: String,
    algorithm_id: u32,
    num_operators: usize,
    descriptors: Vec<ParameterDescriptor>,
    index: HashMap<String, usize>,
}

/// Space identifiers understood by [`ParameterSpace::by_id`].
pub const SPACE_IDS: [&str; 5] = ["fm6-additive", "fm6-stack", "fm6-pairs", "fm2", "toy2"];

impl ParameterSpace {
    pub fn new(
        id: impl Into<String>,
        algorithm_id: u32,
        num_operators: usize,
        descriptors: Vec<ParameterDescriptor>,
    ) -> Result<Self> {
        let id = id.into();
        let mut index = HashMap::new();
        for (i, d) in descriptors.iter().enumerate() {
            if index.insert(d.name.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "space `{id}`: duplicate parameter `{}`",
                    d.name
                )));
            }
            if d.class_count == 0 {
                return Err(Error::InvalidConfig(format!("`{}` has no classes", d.name)));
            }
            match (d.kind, d.fixed_value) {
                (ParamKind::Fixed, Some(v)) if v < d.class_count => {}
                (ParamKind::Fixed, _) => {
                    return Err(Error::InvalidConfig(format!(
                        "fixed parameter `{}` needs a value below {}",
                        d.name, d.class_count
                    )))
                }
                (_, Some(_)) => {
                    return Err(Error::InvalidConfig(format!(
                        "`{}` is not fixed but has a fixed value",
                        d.name
                    )))
                }
                _ => {}
            }
            if let ParamGroup::Operator(op) = d.group {
                if op >= num_operators {
                    return Err(Error::InvalidConfig(format!(
                        "`{}` belongs to op{} of {num_operators}",
                        d.name,
                        op + 1
                    )));
                }
            }
        }
        Ok(ParameterSpace {
            id,
            algorithm_id,
            num_operators,
            descriptors,
            index,
        })
    }

    /// Full FM space for a catalog algorithm with `classes` quantization steps.
    pub fn fm(id: impl Into<String>, algorithm_id: u32, classes: usize) -> Result<Self> {
        let routing = algorithm_topology(algorithm_id)?;
        let n = routing.num_operators();
        let mut descriptors = Vec::with_capacity(n * OPERATOR_PARAMS.len() + 3);
        for op in 0..n {
            let g = ParamGroup::Operator(op);
            for suffix in OPERATOR_PARAMS {
                let name = format!("op{}_{suffix}", op + 1);
                descriptors.push(if suffix == "ratio_coarse" {
                    ParameterDescriptor::categorical(name, COARSE_RATIOS, g)
                } else {
                    ParameterDescriptor::continuous(name, classes, g)
                });
            }
        }
        descriptors.push(ParameterDescriptor::continuous(
            "feedback",
            classes,
            ParamGroup::Global,
        ));
        descriptors.push(ParameterDescriptor::fixed(
            "algorithm",
            ALGORITHM_SLOTS,
            ParamGroup::Global,
            algorithm_id as usize,
        ));
        descriptors.push(ParameterDescriptor::fixed(
            "output",
            classes,
            ParamGroup::Global,
            classes - 1,
        ));
        Self::new(id, algorithm_id, n, descriptors)
    }

    /// Catalog spaces. `toy2` is the two-operator pair with fine ratio,
    /// detune and feedback frozen, leaving twelve free parameters.
    pub fn by_id(id: &str) -> Result<Self> {
        match id {
            "fm6-additive" => Self::fm(id, routing::ADDITIVE, DEFAULT_CLASSES),
            "fm6-stack" => Self::fm(id, routing::STACK6, DEFAULT_CLASSES),
            "fm6-pairs" => Self::fm(id, routing::PAIRS3, DEFAULT_CLASSES),
            "fm2" => Self::fm(id, routing::PAIR2, DEFAULT_CLASSES),
            "toy2" => {
                let full = Self::fm(id, routing::PAIR2, DEFAULT_CLASSES)?;
                let mut frozen = Vec::new();
                for op in 1..=2 {
                    frozen.push((format!("op{op}_ratio_fine"), 0));
                    frozen.push((format!("op{op}_detune"), DEFAULT_CLASSES / 2));
                }
                frozen.push(("feedback".to_string(), 0));
                full.with_frozen(id, &frozen)
            }
            other => Err(Error::UnknownSpace(other.to_string())),
        }
    }

    /// Copy of this space with the named descriptors turned into fixed ones.
    pub fn with_frozen(&self, id: impl Into<String>, values: &[(String, usize)]) -> Result<Self> {
        let mut descriptors = self.descriptors.clone();
        for (name, value) in values {
            let i = self.require(name)?;
            let d = &mut descriptors[i];
            if *value >= d.class_count {
                return Err(Error::InvalidConfig(format!(
                    "cannot freeze `{name}` at {value}: only {} classes",
                    d.class_count
                )));
            }
            d.kind = ParamKind::Fixed;
            d.fixed_value = Some(*value);
        }
        Self::new(id, self.algorithm_id, self.num_operators, descriptors)
    }

    /// Freeze every free descriptor except `free`, at the values in `base`.
    pub fn restricted_to(&self, id: impl Into<String>, free: &[&str], base: &Preset) -> Result<Self> {
        for name in free {
            self.require(name)?;
        }
        let frozen: Vec<(String, usize)> = self
            .descriptors
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_free() && !free.contains(&d.name.as_str()))
            .map(|(i, d)| (d.name.clone(), base.classes()[i]))
            .collect();
        self.with_frozen(id, &frozen)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn algorithm_id(&self) -> u32 {
        self.algorithm_id
    }

    pub fn num_operators(&self) -> usize {
        self.num_operators
    }

    pub fn descriptors(&self) -> &[ParameterDescriptor] {
        &self.descriptors
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.position(name).ok_or_else(|| {
            Error::InvalidPreset(format!("space `{}` has no parameter `{name}`", self.id))
        })
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.descriptors[i].is_free()).collect()
    }

    /// Groups that own at least one free parameter, in a stable order.
    pub fn free_groups(&self) -> Vec<ParamGroup> {
        let mut groups: Vec<ParamGroup> = self
            .descriptors
            .iter()
            .filter(|d| d.is_free())
            .map(|d| d.group)
            .collect();
        groups.sort();
        groups.dedup();
        groups
    }

    /// Preset with fixed descriptors at their values and the rest at zero.
    pub fn default_preset(self: &Arc<Self>) -> Preset {
        let classes = self
            .descriptors
            .iter()
            .map(|d| d.fixed_value.unwrap_or(0))
            .collect();
        Preset {
            space: Arc::clone(self),
            classes,
            theme: None,
        }
    }
}

/// One point in a parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    space: Arc<ParameterSpace>,
    classes: Vec<usize>,
    pub theme: Option<String>,
}

impl Preset {
    pub fn new(space: Arc<ParameterSpace>, classes: Vec<usize>, theme: Option<String>) -> Result<Self> {
        let preset = Preset {
            space,
            classes,
            theme,
        };
        preset.validate()?;
        Ok(preset)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.space.descriptors();
        if self.classes.len() != d.len() {
            return Err(Error::InvalidPreset(format!(
                "{} class indices for {} parameters",
                self.classes.len(),
                d.len()
            )));
        }
        for (desc, &c) in d.iter().zip(&self.classes) {
            if c >= desc.class_count {
                return Err(Error::InvalidPreset(format!(
                    "`{}` = {c} exceeds {} classes",
                    desc.name, desc.class_count
                )));
            }
            if let Some(fixed) = desc.fixed_value {
                if c != fixed {
                    return Err(Error::InvalidPreset(format!(
                        "`{}` is fixed at {fixed}, got {c}",
                        desc.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &Arc<ParameterSpace> {
        &self.space
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.space.position(name).map(|i| self.classes[i])
    }

    /// Class of `name` mapped to the unit interval.
    pub fn unit(&self, name: &str) -> Option<f64> {
        let i = self.space.position(name)?;
        Some(self.space.descriptors()[i].unit(self.classes[i]))
    }

    /// Set a free parameter. Fixed parameters are rejected.
    pub fn set(&mut self, name: &str, class: usize) -> Result<()> {
        let i = self.space.require(name)?;
        self.set_index(i, class)
    }

    pub fn set_index(&mut self, i: usize, class: usize) -> Result<()> {
        let d = &self.space.descriptors()[i];
        if !d.is_free() {
            return Err(Error::InvalidPreset(format!("`{}` is fixed", d.name)));
        }
        if class >= d.class_count {
            return Err(Error::InvalidPreset(format!(
                "`{}` = {class} exceeds {} classes",
                d.name, d.class_count
            )));
        }
        self.classes[i] = class;
        Ok(())
    }

    /// Same class indices reinterpreted in another space with identical
    /// layout (used after freezing descriptors).
    pub fn rebased(&self, space: Arc<ParameterSpace>) -> Result<Preset> {
        Preset::new(space, self.classes.clone(), self.theme.clone())
    }

    pub fn decode(&self) -> BTreeMap<String, DecodedValue> {
        self.space
            .descriptors()
            .iter()
            .zip(&self.classes)
            .map(|(d, &c)| {
                let v = match d.kind {
                    ParamKind::Continuous => DecodedValue::Unit(d.unit(c)),
                    ParamKind::Categorical | ParamKind::Fixed => DecodedValue::Class(c),
                };
                (d.name.clone(), v)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = PresetFile {
            format_version: 1,
            space: self.space.id().to_string(),
            algorithm: self.space.algorithm_id(),
            theme: self.theme.clone(),
            classes: self
                .space
                .descriptors()
                .iter()
                .zip(&self.classes)
                .map(|(d, &c)| (d.name.clone(), c))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("preset serialization cannot fail")
    }

    /// Parse against a known space.
    pub fn from_json(text: &str, space: &Arc<ParameterSpace>) -> Result<Preset> {
        let file: PresetFile = serde_json::from_str(text)?;
        if file.format_version != 1 {
            return Err(Error::InvalidPreset(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        if file.space != space.id() {
            return Err(Error::SpaceMismatch {
                expected: space.id().to_string(),
                found: file.space,
            });
        }
        if file.algorithm != space.algorithm_id() {
            return Err(Error::InvalidPreset(format!(
                "algorithm {} does not match space algorithm {}",
                file.algorithm,
                space.algorithm_id()
            )));
        }
        if let Some(name) = file.classes.keys().find(|k| space.position(k).is_none()) {
            return Err(Error::InvalidPreset(format!("unknown parameter `{name}`")));
        }
        let mut classes = Vec::with_capacity(space.len());
        for d in space.descriptors() {
            match file.classes.get(&d.name) {
                Some(&c) => classes.push(c),
                None => return Err(Error::InvalidPreset(format!("missing parameter `{}`", d.name))),
            }
        }
        Preset::new(Arc::clone(space), classes, file.theme)
    }

    /// Parse, resolving the space id through the catalog.
    pub fn from_json_catalog(text: &str) -> Result<Preset> {
        #[derive(Deserialize)]
        struct Peek {
            space: String,
        }
        let peek: Peek = serde_json::from_str(text)?;
        let space = Arc::new(ParameterSpace::by_id(&peek.space)?);
        Preset::from_json(text, &space)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetFile {
    format_version: u32,
    space: String,
    algorithm: u32,
    theme: Option<String>,
    classes: BTreeMap<String, usize>,
}
