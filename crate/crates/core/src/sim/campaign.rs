//! Multi-estimator campaign: every run flies each estimator through the same
//! gust field, then the misses are summarised against a reference.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{delta_pct, simulate, PairedRunRecord, RunOutcome};
use super::scenario::{Category, Scenario, ScenarioPresets};
use super::{SimConfig, VehicleClass};
use crate::config::Section;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorRef, DEFAULT_ESTIMATORS, REFERENCE_ESTIMATOR};
use crate::stats::{self, cohens_d, friedman, nemenyi, Friedman, Nemenyi, PairedSample, StatReport};

pub const DEFAULT_RUNS: usize = 340;

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub categories: Vec<Category>,
    pub vehicles: Vec<VehicleClass>,
    /// Total runs, spread round-robin over category × vehicle cells.
    pub runs: usize,
    pub seed: u64,
    /// Estimator names, resolved by the caller.
    pub estimators: Vec<String>,
    pub reference: String,
    pub sim: SimConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            categories: Category::ALL.to_vec(),
            vehicles: VehicleClass::presets().to_vec(),
            runs: DEFAULT_RUNS,
            seed: 0,
            estimators: DEFAULT_ESTIMATORS.iter().map(|s| s.to_string()).collect(),
            reference: REFERENCE_ESTIMATOR.into(),
            sim: SimConfig::default(),
        }
    }
}

const CONFIG_KEYS: [&str; 9] =
    ["runs", "seed", "categories", "vehicles", "estimators", "reference", "dt_s", "length_scale_m", "time_cap_factor"];

impl CampaignConfig {
    /// Reads a `[campaign]`-style section; absent keys keep their defaults.
    pub fn from_section(s: &Section) -> Result<Self> {
        s.check_keys(&CONFIG_KEYS)?;
        let d = Self::default();
        let categories = match s.list::<String>("categories")? {
            Some(v) => v.iter().map(|c| Category::from_str(c)).collect::<Result<Vec<_>>>()?,
            None => d.categories,
        };
        let vehicles = match s.list::<String>("vehicles")? {
            Some(v) => v
                .iter()
                .map(|n| VehicleClass::by_name(n).ok_or_else(|| Error::Config(format!("unknown vehicle '{n}'"))))
                .collect::<Result<Vec<_>>>()?,
            None => d.vehicles,
        };
        let cfg = Self {
            categories,
            vehicles,
            runs: s.get_or("runs", d.runs)?,
            seed: s.get_or("seed", d.seed)?,
            estimators: s.list("estimators")?.unwrap_or(d.estimators),
            reference: s.get_or("reference", d.reference)?,
            sim: SimConfig {
                dt_s: s.get_or("dt_s", d.sim.dt_s)?,
                length_scale_m: s.get_or("length_scale_m", d.sim.length_scale_m)?,
                time_cap_factor: s.get_or("time_cap_factor", d.sim.time_cap_factor)?,
                ..d.sim
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.categories.is_empty() || self.vehicles.is_empty() {
            return Err(Error::Config("campaign needs at least one run, category and vehicle".into()));
        }
        if !self.estimators.iter().any(|e| *e == self.reference) {
            return Err(Error::Config(format!("reference '{}' is not in the estimator list", self.reference)));
        }
        if self.estimators.len() < 2 {
            return Err(Error::Config("campaign needs at least two estimators".into()));
        }
        self.sim.validate()
    }

    pub fn cells(&self) -> usize {
        self.categories.len() * self.vehicles.len()
    }

    /// Scenario of run `i`: cells cycle fastest, then variants.
    pub fn scenario(&self, presets: &ScenarioPresets, i: usize) -> Result<Scenario> {
        let cells = self.cells();
        let cell = i % cells;
        let category = self.categories[cell / self.vehicles.len()];
        let vehicle = &self.vehicles[cell % self.vehicles.len()];
        Scenario::build(presets, category, vehicle, i / cells, self.seed.wrapping_add(i as u64))
    }
}

/// One scenario flown by every estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRun {
    pub index: usize,
    pub scenario_id: String,
    pub category: Category,
    pub vehicle: String,
    pub seed: u64,
    /// Aligned with [`CampaignResult::estimators`].
    pub misses_m: Vec<f64>,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub estimators: Vec<String>,
    /// Learnable parameter count per estimator.
    pub params: Vec<usize>,
    pub reference: String,
    pub runs: Vec<CampaignRun>,
}

fn fly_all(scenario: &Scenario, index: usize, estimators: &[EstimatorRef], sim: &SimConfig) -> Result<CampaignRun> {
    let field = scenario.gust_field(sim)?;
    let outcomes = estimators
        .iter()
        .map(|e| simulate(scenario, &field, e.as_ref(), sim))
        .collect::<Result<Vec<RunOutcome>>>()?;
    let aborted: Vec<String> =
        outcomes.iter().filter_map(|o| o.aborted.as_ref().map(|m| format!("{}: {m}", o.estimator))).collect();
    Ok(CampaignRun {
        index,
        scenario_id: scenario.id.clone(),
        category: scenario.category,
        vehicle: scenario.vehicle.name.clone(),
        seed: scenario.seed,
        misses_m: outcomes.iter().map(|o| o.miss_m).collect(),
        aborted: (!aborted.is_empty()).then(|| aborted.join("; ")),
    })
}

/// Runs the campaign in parallel; results keep run order.
pub fn campaign(cfg: &CampaignConfig, presets: &ScenarioPresets, estimators: &[EstimatorRef]) -> Result<CampaignResult> {
    cfg.validate()?;
    let names: Vec<String> = estimators.iter().map(|e| e.name().to_string()).collect();
    if names != cfg.estimators {
        return Err(Error::Config(format!("estimators {names:?} do not match the configured {:?}", cfg.estimators)));
    }
    let runs = (0..cfg.runs)
        .into_par_iter()
        .map(|i| fly_all(&cfg.scenario(presets, i)?, i, estimators, &cfg.sim))
        .collect::<Result<Vec<_>>>()?;
    let params = estimators.iter().map(|e| e.param_count()).collect();
    Ok(CampaignResult { estimators: names, params, reference: cfg.reference.clone(), runs })
}

/// Effect of one estimator against the reference inside a subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEffect {
    pub group: String,
    pub n: usize,
    pub mean_delta_pct: f64,
    pub win_rate: f64,
    pub cohens_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub model: String,
    pub reference: String,
    pub n: usize,
    pub mean_delta_pct: f64,
    /// Ties count half.
    pub win_rate: f64,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub cep_rate: f64,
    /// Tests on the per-run Δ%; None with fewer than two runs.
    pub report: Option<StatReport>,
    pub per_category: Vec<GroupEffect>,
    pub per_vehicle: Vec<GroupEffect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub params: usize,
    pub mean_miss_m: f64,
    pub mean_rank: f64,
    pub cep_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub runs: usize,
    pub aborted: usize,
    pub reference: String,
    /// One row per estimator, in campaign order.
    pub table: Vec<ModelRow>,
    /// Every non-reference estimator against the reference.
    pub comparisons: Vec<Comparison>,
    pub friedman: Option<Friedman>,
    pub nemenyi: Option<Nemenyi>,
}

fn win_counts(records: &[&PairedRunRecord]) -> (usize, usize, usize) {
    records.iter().fold((0, 0, 0), |(w, t, l), r| match r.win_score() {
        s if s == 1.0 => (w + 1, t, l),
        s if s == 0.5 => (w, t + 1, l),
        _ => (w, t, l + 1),
    })
}

fn win_rate(records: &[&PairedRunRecord]) -> f64 {
    records.iter().map(|r| r.win_score()).sum::<f64>() / records.len() as f64
}

fn group_effects<K: ToString>(records: &[&PairedRunRecord], key: impl Fn(&PairedRunRecord) -> K) -> Vec<GroupEffect> {
    let mut groups: Vec<(String, Vec<&PairedRunRecord>)> = Vec::new();
    for r in records {
        let k = key(r).to_string();
        match groups.iter_mut().find(|g| g.0 == k) {
            Some(g) => g.1.push(r),
            None => groups.push((k, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(group, rs)| {
            let deltas: Vec<f64> = rs.iter().map(|r| r.delta_pct).collect();
            GroupEffect {
                group,
                n: rs.len(),
                mean_delta_pct: stats::mean(&deltas),
                win_rate: win_rate(&rs),
                cohens_d: PairedSample::new(deltas).ok().and_then(|s| cohens_d(&s).ok()),
            }
        })
        .collect()
}

impl CampaignResult {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.estimators.iter().position(|e| e == name)
    }

    /// Paired records of estimator `model` against `reference`, aborted runs
    /// included and flagged.
    pub fn paired(&self, reference: &str, model: &str) -> Result<Vec<PairedRunRecord>> {
        let (a, b) = match (self.index_of(reference), self.index_of(model)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Config(format!("estimators '{reference}' or '{model}' not in campaign"))),
        };
        Ok(self
            .runs
            .iter()
            .map(|r| PairedRunRecord {
                scenario_id: r.scenario_id.clone(),
                category: r.category,
                vehicle: r.vehicle.clone(),
                seed: r.seed,
                estimator_a: reference.into(),
                estimator_b: model.into(),
                miss_a_m: r.misses_m[a],
                miss_b_m: r.misses_m[b],
                delta_pct: delta_pct(r.misses_m[a], r.misses_m[b]),
                cep_hit_a: r.aborted.is_none() && r.misses_m[a] <= super::CEP_THRESHOLD_M,
                cep_hit_b: r.aborted.is_none() && r.misses_m[b] <= super::CEP_THRESHOLD_M,
                aborted: r.aborted.clone(),
            })
            .collect())
    }

    fn completed(&self) -> impl Iterator<Item = &CampaignRun> {
        self.runs.iter().filter(|r| r.aborted.is_none())
    }

    pub fn comparison(&self, model: &str, seed: u64) -> Result<Comparison> {
        let records = self.paired(&self.reference, model)?;
        let ok: Vec<&PairedRunRecord> = records.iter().filter(|r| r.aborted.is_none()).collect();
        if ok.is_empty() {
            return Err(Error::domain("every run aborted"));
        }
        let deltas: Vec<f64> = ok.iter().map(|r| r.delta_pct).collect();
        let (wins, ties, losses) = win_counts(&ok);
        let sample = PairedSample::new(deltas.clone())?;
        Ok(Comparison {
            model: model.into(),
            reference: self.reference.clone(),
            n: ok.len(),
            mean_delta_pct: stats::mean(&deltas),
            win_rate: win_rate(&ok),
            wins,
            ties,
            losses,
            cep_rate: ok.iter().filter(|r| r.cep_hit_b).count() as f64 / ok.len() as f64,
            report: (ok.len() >= 2).then(|| StatReport::new(&sample, seed)).transpose()?,
            per_category: group_effects(&ok, |r| r.category),
            per_vehicle: group_effects(&ok, |r| r.vehicle.clone()),
        })
    }

    /// Comparisons against the reference plus the rank analysis over all
    /// estimators on completed runs.
    pub fn summary(&self, seed: u64) -> Result<CampaignSummary> {
        let table_rows: Vec<Vec<f64>> = self.completed().map(|r| r.misses_m.clone()).collect();
        let fr = (table_rows.len() >= 2).then(|| friedman(&table_rows)).transpose()?;
        let nm = match &fr {
            Some(f) if f.k <= 10 => Some(nemenyi(f, 0.05)?),
            _ => None,
        };
        let n = table_rows.len().max(1) as f64;
        let table = self
            .estimators
            .iter()
            .enumerate()
            .map(|(j, name)| ModelRow {
                model: name.clone(),
                params: self.params.get(j).copied().unwrap_or(0),
                mean_miss_m: table_rows.iter().map(|r| r[j]).sum::<f64>() / n,
                mean_rank: fr.as_ref().map_or(f64::NAN, |f| f.mean_ranks[j]),
                cep_rate: table_rows.iter().filter(|r| r[j] <= super::CEP_THRESHOLD_M).count() as f64 / n,
            })
            .collect();
        let comparisons = self
            .estimators
            .iter()
            .filter(|e| **e != self.reference)
            .map(|e| self.comparison(e, seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(CampaignSummary {
            runs: self.runs.len(),
            aborted: self.runs.len() - table_rows.len(),
            reference: self.reference.clone(),
            table,
            comparisons,
            friedman: fr,
            nemenyi: nm,
        })
    }

    /// Tab-separated results, one line per run, one miss column per
    /// estimator.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# params");
        for p in &self.params {
            let _ = write!(out, "\t{p}");
        }
        out.push_str("\nindex\tscenario\tcategory\tvehicle\tseed");
        for e in &self.estimators {
            let _ = write!(out, "\tmiss_{e}");
        }
        out.push_str("\taborted\n");
        for r in &self.runs {
            let _ = write!(out, "{}\t{}\t{}\t{}\t{}", r.index, r.scenario_id, r.category, r.vehicle, r.seed);
            for m in &r.misses_m {
                let _ = write!(out, "\t{m:?}");
            }
            let _ = writeln!(out, "\t{}", r.aborted.as_deref().unwrap_or("").replace(['\t', '\n'], " "));
        }
        out
    }

    pub fn from_tsv(text: &str, reference: &str) -> Result<Self> {
        let bad = |m: &str| Error::Corrupt(format!("campaign results: {m}"));
        let mut lines = text.lines().peekable();
        let params: Option<Vec<usize>> = match lines.peek() {
            Some(l) if l.starts_with("# params") => {
                let p = l.split('\t').skip(1).map(|x| x.parse().map_err(|_| bad("bad param count"))).collect::<Result<_>>()?;
                lines.next();
                Some(p)
            }
            _ => None,
        };
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file"))?.split('\t').collect();
        if header.len() < 7 || header[..5] != ["index", "scenario", "category", "vehicle", "seed"] {
            return Err(bad("unexpected header"));
        }
        let estimators: Vec<String> = header[5..header.len() - 1]
            .iter()
            .map(|h| h.strip_prefix("miss_").map(str::to_string).ok_or_else(|| bad("miss column expected")))
            .collect::<Result<_>>()?;
        let k = estimators.len();
        let runs = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split('\t').collect();
                if f.len() != k + 6 {
                    return Err(bad("wrong column count"));
                }
                let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
                Ok(CampaignRun {
                    index: f[0].parse().map_err(|_| bad("bad index"))?,
                    scenario_id: f[1].into(),
                    category: f[2].parse()?,
                    vehicle: f[3].into(),
                    seed: f[4].parse().map_err(|_| bad("bad seed"))?,
                    misses_m: f[5..5 + k].iter().map(|s| num(s)).collect::<Result<_>>()?,
                    aborted: (!f[k + 5].is_empty()).then(|| f[k + 5].to_string()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if !estimators.iter().any(|e| e == reference) {
            return Err(bad("reference estimator missing"));
        }
        let params = params.unwrap_or_else(|| vec![0; k]);
        if params.len() != k {
            return Err(bad("param counts do not match the estimators"));
        }
        Ok(Self { estimators, params, reference: reference.into(), runs })
    }
}

fn fmt_opt(x: Option<f64>, prec: usize) -> String {
    x.map_or("-".into(), |v| format!("{v:.prec$}"))
}

impl CampaignSummary {
    pub fn comparison(&self, model: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.model == model)
    }

    /// Estimator with the lowest mean rank.
    pub fn best_ranked(&self) -> Option<&str> {
        self.table
            .iter()
            .filter(|r| r.mean_rank.is_finite())
            .min_by(|a, b| a.mean_rank.total_cmp(&b.mean_rank))
            .map(|r| r.model.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "runs {}  aborted {}  reference {}", self.runs, self.aborted, self.reference);
        let _ = writeln!(out, "\nmodel\tparams\tmean_miss_m\tmean_rank\tcep_rate\tdelta_pct\twin_pct\tties\td\tp_t\tp_wilcoxon");
        for row in &self.table {
            let c = self.comparison(&row.model);
            let _ = writeln!(
                out,
                "{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{}\t{}\t{}\t{}\t{}\t{}",
                row.model,
                row.params,
                row.mean_miss_m,
                row.mean_rank,
                row.cep_rate,
                fmt_opt(c.map(|c| c.mean_delta_pct), 2),
                fmt_opt(c.map(|c| 100.0 * c.win_rate), 1),
                c.map_or("-".into(), |c| c.ties.to_string()),
                fmt_opt(c.and_then(|c| c.report.as_ref()?.cohens_d), 3),
                c.and_then(|c| c.report.as_ref()).map_or("-".into(), |r| format!("{:.3e}", r.t.p)),
                c.and_then(|c| c.report.as_ref()).map_or("-".into(), |r| format!("{:.3e}", r.wilcoxon.p)),
            );
        }
        for c in &self.comparisons {
            let _ = writeln!(out, "\n{} vs {}", c.model, c.reference);
            if let Some(r) = &c.report {
                out.push_str(&r.to_text(&c.model));
            }
            for g in c.per_category.iter().chain(&c.per_vehicle) {
                let _ = writeln!(
                    out,
                    "  {}\tn {}\tdelta_pct {:.2}\twin_pct {:.1}\td {}",
                    g.group,
                    g.n,
                    g.mean_delta_pct,
                    100.0 * g.win_rate,
                    fmt_opt(g.cohens_d, 3)
                );
            }
        }
        if let Some(f) = &self.friedman {
            let _ = writeln!(out, "\nfriedman\tchi2 {:.3}\tdf {}\tp {:.3e}\tn {}\tk {}", f.chi2, f.df, f.p, f.n, f.k);
        }
        if let Some(nm) = &self.nemenyi {
            let _ = writeln!(out, "nemenyi\talpha {}\tq {}\tcd {:.4}", nm.alpha, nm.q, nm.critical_difference);
            if let Some(w) = &nm.warning {
                let _ = writeln!(out, "warning\t{w}");
            }
            for (i, row) in nm.significant.iter().enumerate() {
                let marks: Vec<&str> = row.iter().map(|&s| if s { "*" } else { "." }).collect();
                let _ = writeln!(out, "  {}\t{}", self.table[i].model, marks.join(" "));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::estimators::{builtin, DrydenEstimator};

    fn small(estimators: &[&str], runs: usize) -> (CampaignConfig, Vec<EstimatorRef>) {
        let cfg = CampaignConfig {
            runs,
            estimators: estimators.iter().map(|s| s.to_string()).collect(),
            ..CampaignConfig::default()
        };
        (cfg, estimators.iter().map(|n| builtin(n).unwrap()).collect())
    }

    #[test]
    fn runs_cycle_over_cells_then_variants() {
        let cfg = CampaignConfig::default();
        let p = ScenarioPresets::shipped();
        assert_eq!(cfg.cells(), 18);
        assert_eq!(cfg.scenario(p, 0).unwrap().id, "A/supersonic/v0");
        assert_eq!(cfg.scenario(p, 4).unwrap().id, "B/high-supersonic/v0");
        assert_eq!(cfg.scenario(p, 18 + 3).unwrap().id, "B/supersonic/v1");
        assert_eq!(cfg.scenario(p, 21).unwrap().seed, 21);
    }

    #[test]
    fn identical_estimators_tie_everywhere() {
        let cfg = CampaignConfig {
            runs: 18,
            estimators: vec!["dryden".into(), "dryden-copy".into()],
            reference: "dryden".into(),
            ..CampaignConfig::default()
        };
        struct Copy(DrydenEstimator);
        impl crate::TurbulenceEstimator for Copy {
            fn name(&self) -> &str {
                "dryden-copy"
            }
            fn estimate_tke(&self, s: &crate::AtmosphericState) -> f64 {
                self.0.estimate_tke(s)
            }
        }
        let ests: Vec<EstimatorRef> = vec![builtin("dryden").unwrap(), Arc::new(Copy(DrydenEstimator::default()))];
        let res = campaign(&cfg, ScenarioPresets::shipped(), &ests).unwrap();
        let s = res.summary(1).unwrap();
        let c = s.comparison("dryden-copy").unwrap();
        assert_eq!((c.win_rate, c.ties, c.mean_delta_pct), (0.5, c.n, 0.0));
        assert_eq!(s.friedman.as_ref().unwrap().p, 1.0);
    }

    #[test]
    fn summary_matches_records() {
        let (cfg, ests) = small(&["truth", "none", "dryden"], 36);
        let res = campaign(&cfg, ScenarioPresets::shipped(), &ests).unwrap();
        let s = res.summary(5).unwrap();
        assert_eq!(s.table.len(), 3);
        let recs = res.paired("dryden", "truth").unwrap();
        let ok: Vec<f64> = recs.iter().filter(|r| r.aborted.is_none()).map(|r| r.delta_pct).collect();
        let c = s.comparison("truth").unwrap();
        assert!((c.mean_delta_pct - ok.iter().sum::<f64>() / ok.len() as f64).abs() < 1e-12);
        assert_eq!(c.wins + c.ties + c.losses, c.n);
        assert_eq!(c.per_vehicle.len(), 3);
        assert_eq!(c.per_category.len(), 6);
        assert_eq!(s.best_ranked(), Some("truth"));
        assert!(c.mean_delta_pct > 0.0);
        let text = s.to_text();
        assert!(text.contains("friedman") && text.contains("nemenyi"));
    }

    #[test]
    fn results_round_trip_through_tsv() {
        let (cfg, ests) = small(&["dryden", "none"], 6);
        let res = campaign(&cfg, ScenarioPresets::shipped(), &ests).unwrap();
        let back = CampaignResult::from_tsv(&res.to_tsv(), "dryden").unwrap();
        assert_eq!(back, res);
        assert!(CampaignResult::from_tsv("index\tnope\n", "dryden").is_err());
    }

    #[test]
    fn campaigns_are_deterministic_and_isolated() {
        let (cfg, ests) = small(&["dryden", "truth"], 8);
        let a = campaign(&cfg, ScenarioPresets::shipped(), &ests).unwrap();
        let b = campaign(&cfg, ScenarioPresets::shipped(), &ests).unwrap();
        assert_eq!(a.to_tsv(), b.to_tsv());
        let (cfg2, ests2) = small(&["dryden", "none"], 8);
        let c = campaign(&cfg2, ScenarioPresets::shipped(), &ests2).unwrap();
        for (x, y) in a.runs.iter().zip(&c.runs) {
            assert_eq!(x.misses_m[0].to_bits(), y.misses_m[0].to_bits());
        }
    }

    #[test]
    fn config_section_overrides_defaults() {
        let f = crate::config::ConfigFile::parse(
            "[campaign]\nruns = 12\ncategories = A, F\nvehicles = M2.8\nestimators = pstnet, dryden\n",
        )
        .unwrap();
        let cfg = CampaignConfig::from_section(f.section("campaign").unwrap()).unwrap();
        assert_eq!((cfg.runs, cfg.cells()), (12, 2));
        assert_eq!(cfg.estimators, vec!["pstnet", "dryden"]);
        let bad = crate::config::ConfigFile::parse("[campaign]\nestimators = pstnet, mlp\n").unwrap();
        assert!(CampaignConfig::from_section(bad.section("campaign").unwrap()).is_err());
    }
}
