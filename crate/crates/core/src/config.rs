//! TOML overrides for experiment settings.
//!
//! Every key is optional; absent keys keep the current value. Unknown keys
//! are rejected so typos do not silently fall back to defaults.
//!
//! ```toml
//! [experiment]
//! problem = "rosen:5:100"
//! runs = 5
//!
//! [bo]
//! kernel = "gaussian"
//! max_evals = 300
//!
//! [trust_region]
//! u_sigma0 = 0.04
//!
//! [qn]
//! c2 = 0.9
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::acquisition::AcquisitionKind;
use crate::error::{GeboError, Result};
use crate::harness::{ExperimentConfig, Method};
use crate::kernels::KernelKind;
use crate::problems::ProblemSpec;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub bo: BoSection,
    #[serde(default)]
    pub trust_region: TrustRegionSection,
    #[serde(default)]
    pub hp: HpSection,
    #[serde(default)]
    pub acquisition: AcquisitionSection,
    #[serde(default)]
    pub qn: QnSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub problem: Option<String>,
    pub methods: Option<String>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub grad_noise: Option<f64>,
    pub f_tol: Option<f64>,
    pub optimality_orders: Option<f64>,
    pub workers: Option<usize>,
    pub start_lower: Option<Vec<f64>>,
    pub start_upper: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoSection {
    pub kernel: Option<String>,
    pub cond_max: Option<f64>,
    pub n_close: Option<usize>,
    pub n_last: Option<usize>,
    pub noisy: Option<bool>,
    pub optimality_orders: Option<f64>,
    pub stall_limit: Option<usize>,
    pub max_evals: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustRegionSection {
    pub u_c0: Option<f64>,
    pub rho_inc: Option<f64>,
    pub rho_dec: Option<f64>,
    pub rho_data: Option<f64>,
    pub u_sigma0: Option<f64>,
    pub u_sigma_min: Option<f64>,
    pub u_sigma_max: Option<f64>,
    pub n_data_sigma: Option<usize>,
    pub n_data_cap: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpSection {
    pub n_lhs: Option<usize>,
    pub n_med: Option<usize>,
    pub n_log: Option<f64>,
    pub gamma_init: Option<f64>,
    pub sigma_f_init: Option<f64>,
    pub sigma_grad_init: Option<f64>,
    pub sigma_k_init: Option<f64>,
    pub alpha_init: Option<f64>,
    pub multistart: Option<bool>,
    pub max_iter: Option<usize>,
    pub grad_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSection {
    /// `ei` or `uc:<omega>`.
    pub kind: Option<String>,
    pub n_lhs: Option<usize>,
    pub n_best: Option<usize>,
    pub max_iter: Option<usize>,
    pub constraint_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QnSection {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub max_ls_evals: Option<usize>,
    pub optimality_orders: Option<f64>,
    pub step_tol: Option<f64>,
    pub max_evals: Option<usize>,
    pub max_iter: Option<usize>,
    pub stall_limit: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GeboError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Builds a config from the `[experiment]` problem, or `fallback` when absent.
    pub fn to_experiment(&self, fallback: Option<ProblemSpec>) -> Result<ExperimentConfig> {
        let problem = match (&self.experiment.problem, fallback) {
            (Some(p), _) => ProblemSpec::parse(p)?,
            (None, Some(p)) => p,
            (None, None) => return Err(GeboError::Config("no problem given".into())),
        };
        let mut cfg = ExperimentConfig::new(problem);
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    /// Overwrites every key present in the file.
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        let e = &self.experiment;
        if let Some(p) = &e.problem {
            cfg.problem = ProblemSpec::parse(p)?;
        }
        if let Some(m) = &e.methods {
            cfg.methods = Method::parse_list(m)?;
        }
        set(&mut cfg.n_runs, e.runs);
        set(&mut cfg.seed, e.seed);
        set(&mut cfg.grad_noise, e.grad_noise);
        set(&mut cfg.f_tol, e.f_tol);
        set(&mut cfg.optimality_orders, e.optimality_orders);
        set(&mut cfg.workers, e.workers);
        match (&e.start_lower, &e.start_upper) {
            (Some(lo), Some(hi)) => cfg.start_box = Some((lo.clone(), hi.clone())),
            (None, None) => {}
            _ => return Err(GeboError::Config("start_lower and start_upper must be given together".into())),
        }

        let b = &self.bo;
        let bo = &mut cfg.bo;
        if let Some(k) = &b.kernel {
            bo.kernel = KernelKind::parse(k)?;
        }
        set(&mut bo.cond_max, b.cond_max);
        set(&mut bo.n_close, b.n_close);
        set(&mut bo.n_last, b.n_last);
        set(&mut bo.noisy, b.noisy);
        set(&mut bo.optimality_orders, b.optimality_orders);
        set(&mut bo.stall_limit, b.stall_limit);
        set(&mut bo.max_evals, b.max_evals);

        let t = &self.trust_region;
        let tr = &mut bo.trust_region;
        set(&mut tr.u_c0, t.u_c0);
        set(&mut tr.rho_inc, t.rho_inc);
        set(&mut tr.rho_dec, t.rho_dec);
        set(&mut tr.rho_data, t.rho_data);
        set(&mut tr.u_sigma0, t.u_sigma0);
        set(&mut tr.u_sigma_min, t.u_sigma_min);
        set(&mut tr.u_sigma_max, t.u_sigma_max);
        set(&mut tr.n_data_sigma, t.n_data_sigma);
        set(&mut tr.n_data_cap, t.n_data_cap);

        let h = &self.hp;
        let hp = &mut bo.hp_search;
        set(&mut hp.n_lhs, h.n_lhs);
        set(&mut hp.n_med, h.n_med);
        set(&mut hp.n_log, h.n_log);
        set(&mut hp.gamma_init, h.gamma_init);
        set(&mut hp.sigma_f_init, h.sigma_f_init);
        set(&mut hp.sigma_grad_init, h.sigma_grad_init);
        set(&mut hp.sigma_k_init, h.sigma_k_init);
        set(&mut hp.alpha_init, h.alpha_init);
        set(&mut hp.multistart, h.multistart);
        set(&mut hp.max_iter, h.max_iter);
        set(&mut hp.grad_tol, h.grad_tol);

        let a = &self.acquisition;
        let acq = &mut bo.acquisition;
        if let Some(k) = &a.kind {
            acq.kind = AcquisitionKind::parse(k)?;
        }
        set(&mut acq.n_lhs, a.n_lhs);
        set(&mut acq.n_best, a.n_best);
        set(&mut acq.max_iter, a.max_iter);
        set(&mut acq.constraint_tol, a.constraint_tol);

        let q = &self.qn;
        let qn = &mut cfg.qn;
        set(&mut qn.c1, q.c1);
        set(&mut qn.c2, q.c2);
        set(&mut qn.max_ls_evals, q.max_ls_evals);
        set(&mut qn.optimality_orders, q.optimality_orders);
        set(&mut qn.step_tol, q.step_tol);
        set(&mut qn.max_evals, q.max_evals);
        set(&mut qn.max_iter, q.max_iter);
        set(&mut qn.stall_limit, q.stall_limit);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_keeps_defaults() {
        let file = ConfigFile::parse("").unwrap();
        let spec = ProblemSpec::parse("quad:3").unwrap();
        let cfg = file.to_experiment(Some(spec.clone())).unwrap();
        assert_eq!(cfg, ExperimentConfig::new(spec));
    }

    #[test]
    fn overrides_reach_nested_settings() {
        let text = r#"
            [experiment]
            problem = "rosen:4:100"
            runs = 3
            methods = "bfgs"
            [bo]
            kernel = "ratquad:2"
            max_evals = 50
            [trust_region]
            rho_dec = 0.25
            [hp]
            n_lhs = 10
            [acquisition]
            kind = "uc:1.5"
            [qn]
            c2 = 0.5
        "#;
        let cfg = ConfigFile::parse(text).unwrap().to_experiment(None).unwrap();
        assert_eq!(cfg.problem.dim(), 4);
        assert_eq!(cfg.n_runs, 3);
        assert_eq!(cfg.methods, vec![Method::Bfgs]);
        assert_eq!(cfg.bo.kernel, KernelKind::RationalQuadratic { alpha: 2.0 });
        assert_eq!(cfg.bo.max_evals, 50);
        assert_eq!(cfg.bo.trust_region.rho_dec, 0.25);
        assert_eq!(cfg.bo.hp_search.n_lhs, 10);
        assert_eq!(cfg.bo.acquisition.kind, AcquisitionKind::UpperConfidence { omega: 1.5 });
        assert_eq!(cfg.qn.c2, 0.5);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(ConfigFile::parse("[bo]\nmax_eval = 3").is_err());
        assert!(ConfigFile::parse("[bogus]\nx = 1").is_err());
    }

    #[test]
    fn half_start_box_rejected() {
        let file = ConfigFile::parse("[experiment]\nstart_lower = [0.0]").unwrap();
        assert!(file.to_experiment(ProblemSpec::parse("quad:1").ok()).is_err());
    }

    #[test]
    fn missing_problem_rejected() {
        assert!(ConfigFile::parse("").unwrap().to_experiment(None).is_err());
    }
}
