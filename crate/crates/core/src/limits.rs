use crate::error::{Error, Result};

/// Environment variable that overrides both dimension caps.
pub const MAX_DIM_ENV: &str = "DUCHARGE_MAX_DIM";

pub const DEFAULT_MAX_CHAIN_DIM: usize = 4096;
pub const DEFAULT_MAX_SUPEROP_DIM: usize = 4096;

/// Dimension caps for dense allocations.
///
/// `max_chain_dim` bounds the Hilbert-space dimension `d^{2L}` of a chain;
/// `max_superop_dim` bounds the side `d^{2w}` of a window superoperator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_chain_dim: usize,
    pub max_superop_dim: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_chain_dim: DEFAULT_MAX_CHAIN_DIM, max_superop_dim: DEFAULT_MAX_SUPEROP_DIM }
    }
}

impl Limits {
    /// Defaults, with both caps replaced by `DUCHARGE_MAX_DIM` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(MAX_DIM_ENV) {
            Ok(s) => {
                let cap: usize = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("{MAX_DIM_ENV}={s:?} is not a positive integer")))?;
                if cap == 0 {
                    return Err(Error::Parse(format!("{MAX_DIM_ENV} must be positive")));
                }
                Ok(Self { max_chain_dim: cap, max_superop_dim: cap })
            }
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn check_chain(&self, what: &'static str, requested: u128) -> Result<()> {
        check(what, requested, self.max_chain_dim)
    }

    pub fn check_superop(&self, what: &'static str, requested: u128) -> Result<()> {
        check(what, requested, self.max_superop_dim)
    }
}

fn check(what: &'static str, requested: u128, cap: usize) -> Result<()> {
    if requested > cap as u128 {
        Err(Error::Resource { what, requested, cap })
    } else {
        Ok(())
    }
}
