use crate::constants::AMU;
use crate::kv;
use crate::{Error, Result};

use super::{HyperfineManifold, QubitSpec};

const BA137: &str = include_str!("../../data/ba137-constants.txt");

const KEYS: [&str; 7] = ["s12.A_hf_mhz", "s12.gJ", "d52.A_hf_mhz", "d52.B_quad_mhz", "d52.gJ", "gI", "ion.mass_amu"];

/// Atomic inputs for the two qubit manifolds. None of these are fitted here;
/// they come from a constants file (see [`AtomicConstants::parse`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomicConstants {
    pub s12_a_hf_mhz: f64,
    pub s12_g_j: f64,
    pub d52_a_hf_mhz: f64,
    pub d52_b_quad_mhz: f64,
    pub d52_g_j: f64,
    pub g_i: f64,
    pub ion_mass_amu: f64,
}

impl AtomicConstants {
    /// Shipped ¹³⁷Ba⁺ literature set.
    pub fn ba137() -> Self {
        Self::parse(BA137).expect("shipped constants file parses")
    }

    /// Text of the shipped ¹³⁷Ba⁺ constants file.
    pub fn ba137_source() -> &'static str {
        BA137
    }

    /// Parses the flat key-value format. Every key in the set
    /// `s12.A_hf_mhz, s12.gJ, d52.A_hf_mhz, d52.B_quad_mhz, d52.gJ, gI,
    /// ion.mass_amu` is required; anything else is rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let entries = kv::parse(text)?;
        let mut values = [None; KEYS.len()];
        for e in &entries {
            let Some(slot) = KEYS.iter().position(|k| *k == e.key) else {
                return Err(Error::Parse { line: e.line, message: format!("unknown key `{}`", e.key) });
            };
            values[slot] = Some(e.parse_f64()?);
        }
        let get = |k: usize| values[k].ok_or_else(|| Error::Parse { line: 0, message: format!("missing key `{}`", KEYS[k]) });
        let c = Self {
            s12_a_hf_mhz: get(0)?,
            s12_g_j: get(1)?,
            d52_a_hf_mhz: get(2)?,
            d52_b_quad_mhz: get(3)?,
            d52_g_j: get(4)?,
            g_i: get(5)?,
            ion_mass_amu: get(6)?,
        };
        if c.ion_mass_amu <= 0.0 {
            return Err(Error::invalid("ion mass must be positive"));
        }
        Ok(c)
    }

    pub fn s12(&self) -> HyperfineManifold {
        HyperfineManifold::new(1, 3, self.s12_a_hf_mhz * 1e6, 0.0, self.s12_g_j, self.g_i).expect("finite constants")
    }

    pub fn d52(&self) -> HyperfineManifold {
        HyperfineManifold::new(5, 3, self.d52_a_hf_mhz * 1e6, self.d52_b_quad_mhz * 1e6, self.d52_g_j, self.g_i)
            .expect("finite constants")
    }

    pub fn s_qubit(&self) -> QubitSpec {
        QubitSpec::s_type(self.s12())
    }

    pub fn d_qubit(&self) -> QubitSpec {
        QubitSpec::d_type(self.d52())
    }

    pub fn ion_mass_kg(&self) -> f64 {
        self.ion_mass_amu * AMU
    }
}
