use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::ext::ExtFloat;

/// Named terms of a bound's right-hand side, their sum, the constants that
/// produced them and the inputs that were used.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub bound: &'static str,
    terms: Vec<(&'static str, ExtFloat)>,
    total: ExtFloat,
    constants: Vec<(&'static str, ExtFloat)>,
    pub params: serde_json::Value,
}

impl BoundReport {
    pub(crate) fn new(
        bound: &'static str,
        terms: Vec<(&'static str, ExtFloat)>,
        constants: Vec<(&'static str, ExtFloat)>,
        params: serde_json::Value,
    ) -> Self {
        let total = terms.iter().fold(ExtFloat::ZERO, |acc, (_, v)| acc + *v);
        BoundReport { bound, terms, total, constants, params }
    }

    pub fn terms(&self) -> &[(&'static str, ExtFloat)] {
        &self.terms
    }

    pub fn term(&self, name: &str) -> Option<ExtFloat> {
        self.terms.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    pub fn constant(&self, name: &str) -> Option<ExtFloat> {
        self.constants.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    pub fn constants(&self) -> &[(&'static str, ExtFloat)] {
        &self.constants
    }

    pub fn total(&self) -> ExtFloat {
        self.total
    }
}

struct Ordered<'a>(&'a [(&'static str, ExtFloat)]);

impl Serialize for Ordered<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut m = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl Serialize for BoundReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("BoundReport", 5)?;
        s.serialize_field("bound", self.bound)?;
        s.serialize_field("terms", &Ordered(&self.terms))?;
        s.serialize_field("total", &self.total)?;
        s.serialize_field("constants", &Ordered(&self.constants))?;
        s.serialize_field("params", &self.params)?;
        s.end()
    }
}
