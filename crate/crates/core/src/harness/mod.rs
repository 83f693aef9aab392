//! Cross-validation, evaluation, file formats and runtime settings.

pub mod cv;
pub mod eval;
pub mod io;

pub use cv::{
    cv_train_len, cv_windows, default_bandwidth_grid, feasible_orders, rolling_cv, select_bandwidth, select_order,
    CvOutcome, CvWindow,
};
pub use eval::{
    choose_bandwidth, evaluate_models, evaluate_simulation, fit_model, horizon_windows, CvConfig, EvalConfig,
    EvalReport, Selection,
};
pub use io::{load_series, parse_series, BackMap, SeriesKind};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "GEODECOMP_THREADS";

/// Sizes the global worker pool from `GEODECOMP_THREADS` when set. Returns
/// the thread count in effect. Safe to call more than once.
pub fn init_thread_pool() -> crate::error::Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| crate::error::Error::invalid(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        // Fails only if the pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}
