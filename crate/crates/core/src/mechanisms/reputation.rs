/// Default cap on reputation weight; bounds the influence of heavy contributors.
pub const DEFAULT_MAX_WEIGHT: f64 = 5.0;

/// `min(1 + log2(1 + contributions), w_max)` with the default cap.
pub fn reputation_weight(contributions: u64) -> f64 {
    reputation_weight_capped(contributions, DEFAULT_MAX_WEIGHT)
}

pub fn reputation_weight_capped(contributions: u64, w_max: f64) -> f64 {
    let raw = 1.0 + (1.0 + contributions as f64).log2();
    raw.min(w_max).max(1.0)
}
