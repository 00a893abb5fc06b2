use serde::Serialize;

/// Where a reported number comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Computed directly from the data.
    Measured,
    /// Estimated by a fit over sampled data.
    Fitted,
    /// Evaluated from a closed-form rule.
    #[serde(rename = "paper-formula")]
    Formula,
}

/// A reported value tagged with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tagged<T> {
    pub value: T,
    pub provenance: Provenance,
}

pub fn measured<T>(value: T) -> Tagged<T> {
    Tagged { value, provenance: Provenance::Measured }
}

pub fn fitted<T>(value: T) -> Tagged<T> {
    Tagged { value, provenance: Provenance::Fitted }
}

pub fn formula<T>(value: T) -> Tagged<T> {
    Tagged { value, provenance: Provenance::Formula }
}
