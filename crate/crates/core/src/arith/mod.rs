//! Arithmetic: the Möbius sieve, continued fractions, and the resonance classification.

mod alpha;
mod cf;
mod sieve;

pub use alpha::{frac_product, frac_product_wide, Alpha, AlphaSpec};
pub use cf::{
    cf_expand, classify, dist_to_int_exact, liouville_alpha, liouville_alpha_with_tail, m1_member,
    ContinuedFraction, Convergent, DenominatorClassification, GOLDEN_TAIL,
};
pub use sieve::{MobiusTable, SieveMethod, CACHE_HEADER_LEN, CACHE_MAGIC};
