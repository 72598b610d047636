//! Experiment pipeline: gen-data → train-fsa → λ-sweep → backend comparison
//! → masking robustness, with per-stage completion markers keyed to the
//! config hash so a finished pipeline reruns as a no-op.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use gridshed_core::classifiers::{save_model, train_classifier, ClassifierTrainConfig};
use gridshed_core::env::UflsEnv;
use gridshed_core::sac::{evaluate_safety, load_agent};

use crate::commands::{metrics_csv_row, train_agent_run, TrainAgentArgs, METRICS_CSV_HEADER};
use crate::config::ExperimentConfig;
use crate::util::{
    build_backend, load_case, load_contingency_file, load_dataset_checked, mean_std, state_stats,
    unsafe_pool, write_text,
};

pub struct Pipeline {
    pub cfg: ExperimentConfig,
    pub config_hash: String,
}

impl Pipeline {
    pub fn new(cfg: ExperimentConfig, config_hash: String) -> Self {
        Pipeline { cfg, config_hash }
    }

    fn short_hash(&self) -> &str {
        ExperimentConfig::short_hash(&self.config_hash)
    }

    fn marker_path(&self, stage: &str) -> PathBuf {
        self.cfg.out_dir.join("stages").join(format!("{stage}.done"))
    }

    /// True when the stage already completed under this exact config.
    fn stage_done(&self, stage: &str) -> Result<bool> {
        let path = self.marker_path(stage);
        if !path.exists() {
            return Ok(false);
        }
        let recorded = std::fs::read_to_string(&path)?;
        if recorded.trim() != self.config_hash {
            bail!(
                "stage {stage} was completed under a different config (hash mismatch); \
                 use a fresh --out directory"
            );
        }
        Ok(true)
    }

    fn mark_done(&self, stage: &str) -> Result<()> {
        write_text(self.marker_path(stage), &self.config_hash)
    }

    fn data_dir(&self) -> PathBuf {
        self.cfg.out_dir.join("data")
    }

    fn models_dir(&self) -> PathBuf {
        self.cfg.out_dir.join("models")
    }

    fn agent_dir(&self, tag: &str) -> PathBuf {
        self.cfg.out_dir.join("agents").join(tag)
    }

    pub fn run(&self) -> Result<()> {
        self.stage("gen-data", |p| p.stage_gen_data())?;
        self.stage("train-fsa", |p| p.stage_train_fsa())?;
        self.stage("lambda-sweep", |p| p.stage_lambda_sweep())?;
        self.stage("compare-backends", |p| p.stage_compare_backends(false))?;
        self.stage("masking", |p| p.stage_masking())?;
        self.write_manifest()?;
        println!("pipeline complete: {}", self.cfg.out_dir.display());
        Ok(())
    }

    fn stage(&self, name: &str, body: impl FnOnce(&Self) -> Result<()>) -> Result<()> {
        if self.stage_done(name)? {
            println!("stage {name}: already complete, skipping");
            return Ok(());
        }
        println!("stage {name}: running");
        body(self).with_context(|| format!("stage {name}"))?;
        self.mark_done(name)
    }

    fn stage_gen_data(&self) -> Result<()> {
        let args = crate::commands::GenDataArgs {
            case: self.cfg.case.clone(),
            contingencies: self.cfg.contingencies.clone(),
            n: self.cfg.dataset_size,
            seed: self.cfg.seeds[0],
            out: self.data_dir(),
        };
        crate::commands::gen_data(&args)
    }

    fn stage_train_fsa(&self) -> Result<()> {
        let (base, case_text) = load_case(&self.cfg.case)?;
        let (ds, _) = load_dataset_checked(self.data_dir(), &case_text, None)?;
        let seed = self.cfg.seeds[0];
        let mut csv = format!("{METRICS_CSV_HEADER}\n");
        for name in &self.cfg.classifiers {
            let kind: gridshed_core::classifiers::ClassifierKind = name.as_str().parse()?;
            let cfg = ClassifierTrainConfig { seed, ..Default::default() };
            let (model, metrics, _) = train_classifier(kind, &base, &ds, &cfg)?;
            save_model(self.models_dir().join(name), &model, seed)?;
            csv.push_str(&metrics_csv_row(name, &metrics, seed, self.short_hash()));
            csv.push('\n');
            println!(
                "  {name}: acc {:.2} prec {:.2} rec {:.2}",
                metrics.accuracy, metrics.precision, metrics.recall
            );
        }
        write_text(self.cfg.out_dir.join("table1.csv"), &csv)
    }

    fn agent_args(&self, fsa: &str, lambda: f64, episodes: usize, seed: u64, tag: &str) -> TrainAgentArgs {
        TrainAgentArgs {
            case: self.cfg.case.clone(),
            contingencies: self.cfg.contingencies.clone(),
            data: self.data_dir(),
            fsa: fsa.to_string(),
            fsa_ckpt: (fsa != "tds").then(|| self.models_dir().join(fsa)),
            lambda,
            episodes,
            seed,
            out: self.agent_dir(tag),
            shed_buses: self.cfg.shed_buses,
            eval_points: self.cfg.eval_points,
            actor_lr: None,
            critic_lr: None,
            alpha: None,
        }
    }

    fn stage_lambda_sweep(&self) -> Result<()> {
        anyhow::ensure!(
            self.cfg.classifiers.iter().any(|c| c == "gnn"),
            "the λ sweep trains against the GNN surrogate; add \"gnn\" to classifiers"
        );
        let mut runs_csv = String::from(
            "lambda,seed,safety_classifier,safety_tds,total_shed,train_wall_s,config_hash\n",
        );
        let mut rows = Vec::new();
        for &lambda in &self.cfg.lambda_grid {
            let mut safety_c = Vec::new();
            let mut safety_t = Vec::new();
            let mut shed = Vec::new();
            for &seed in &self.cfg.seeds {
                let tag = format!("lambda{lambda}_seed{seed}");
                let args = self.agent_args("gnn", lambda, self.cfg.episodes, seed, &tag);
                let run = train_agent_run(&args, &self.cfg.sac)?;
                runs_csv.push_str(&format!(
                    "{lambda},{seed},{:.4},{:.4},{:.4},{:.4},{}\n",
                    run.safety_classifier,
                    run.safety_tds,
                    run.shed,
                    run.train_wall_s,
                    self.short_hash()
                ));
                safety_c.push(run.safety_classifier);
                safety_t.push(run.safety_tds);
                shed.push(run.shed);
            }
            let (cm, cs) = mean_std(&safety_c);
            let (tm, ts) = mean_std(&safety_t);
            let (sm, ss) = mean_std(&shed);
            rows.push(format!(
                "{lambda},{cm:.4},{cs:.4},{tm:.4},{ts:.4},{sm:.4},{ss:.4},{},{}",
                self.cfg.seeds.len(),
                self.short_hash()
            ));
        }
        let mut csv = String::from(
            "lambda,safety_classifier_mean,safety_classifier_std,safety_tds_mean,safety_tds_std,\
             total_shed_mean,total_shed_std,seeds,config_hash\n",
        );
        for r in rows {
            csv.push_str(&r);
            csv.push('\n');
        }
        write_text(self.cfg.out_dir.join("table2.csv"), &csv)?;
        write_text(self.cfg.out_dir.join("table2_runs.csv"), &runs_csv)
    }

    /// Backend comparison rows; with `skip_missing` a backend without a
    /// trained model is skipped with a note instead of failing.
    pub fn stage_compare_backends(&self, skip_missing: bool) -> Result<()> {
        let episodes = self.cfg.table3_episodes.unwrap_or(self.cfg.episodes);
        let lambda = self.cfg.table3_lambda;
        let mut csv = String::from(
            "backend,safety_classifier_mean,safety_classifier_std,safety_tds_mean,safety_tds_std,\
             total_shed_mean,total_shed_std,train_time_min_mean,test_time_s_mean,seeds,config_hash\n",
        );
        for backend in &self.cfg.table3_backends {
            if backend != "tds" {
                let stem = self.models_dir().join(backend);
                let json = stem.with_extension("json");
                if !json.exists() {
                    if skip_missing {
                        println!("  {backend}: checkpoint missing, row skipped");
                        continue;
                    }
                    bail!("backend {backend} has no trained model at {}", json.display());
                }
            }
            let mut safety_c = Vec::new();
            let mut safety_t = Vec::new();
            let mut shed = Vec::new();
            let mut train_min = Vec::new();
            let mut test_s = Vec::new();
            for &seed in &self.cfg.seeds {
                let tag = format!("table3_{backend}_seed{seed}");
                let args = self.agent_args(backend, lambda, episodes, seed, &tag);
                let run = train_agent_run(&args, &self.cfg.sac)?;
                safety_c.push(run.safety_classifier);
                safety_t.push(run.safety_tds);
                shed.push(run.shed);
                train_min.push(run.train_wall_s / 60.0);
                test_s.push(run.eval_wall_s);
            }
            let (cm, cs) = mean_std(&safety_c);
            let (tm, ts) = mean_std(&safety_t);
            let (sm, ss) = mean_std(&shed);
            let (trm, _) = mean_std(&train_min);
            let (tem, _) = mean_std(&test_s);
            csv.push_str(&format!(
                "{backend},{cm:.4},{cs:.4},{tm:.4},{ts:.4},{sm:.4},{ss:.4},{trm:.4},{tem:.4},{},{}\n",
                self.cfg.seeds.len(),
                self.short_hash()
            ));
        }
        write_text(self.cfg.out_dir.join("table3.csv"), &csv)
    }

    fn stage_masking(&self) -> Result<()> {
        let (base, case_text) = load_case(&self.cfg.case)?;
        let (contingencies, cont_text) = load_contingency_file(&self.cfg.contingencies)?;
        let (ds, manifest) = load_dataset_checked(self.data_dir(), &case_text, Some(&cont_text))?;
        let stats = state_stats(&ds);
        let (eval_set, _) = unsafe_pool(&base, &ds, &manifest, self.cfg.eval_points)?;

        let mut csv = String::from(
            "backend,safety_masked_mean,safety_masked_std,safety_unmasked_mean,\
             safety_unmasked_std,safety_tds_mean,safety_tds_std,seeds,config_hash\n",
        );
        for backend in self.cfg.table3_backends.iter().filter(|b| b.as_str() != "tds") {
            let mut masked = Vec::new();
            let mut unmasked = Vec::new();
            let mut tds = Vec::new();
            for &seed in &self.cfg.seeds {
                let tag = format!("table3_{backend}_seed{seed}");
                let summary_path = self.agent_dir(&tag).join("summary.json");
                let summary: serde_json::Value =
                    serde_json::from_str(&std::fs::read_to_string(&summary_path).with_context(
                        || format!("missing {}; run compare-backends first", summary_path.display()),
                    )?)?;
                unmasked.push(summary["safety_classifier"].as_f64().unwrap_or(0.0));
                tds.push(summary["safety_tds"].as_f64().unwrap_or(0.0));

                let agent = load_agent(self.agent_dir(&tag).join("agent"))?;
                let b = build_backend(
                    backend,
                    &contingencies,
                    Some(&self.models_dir().join(backend)),
                    Some((self.cfg.mask_fraction, seed)),
                )?;
                let env = UflsEnv::new(&base, self.cfg.shed_buses, stats.clone(), b.as_ref())?;
                let (safety, _) = evaluate_safety(&agent, &env, &eval_set, None)?;
                masked.push(safety);
            }
            let (mm, ms) = mean_std(&masked);
            let (um, us) = mean_std(&unmasked);
            let (tm, ts) = mean_std(&tds);
            csv.push_str(&format!(
                "{backend},{mm:.4},{ms:.4},{um:.4},{us:.4},{tm:.4},{ts:.4},{},{}\n",
                self.cfg.seeds.len(),
                self.short_hash()
            ));
            println!("  {backend}: masked {mm:.1}% vs unmasked {um:.1}%");
        }
        write_text(self.cfg.out_dir.join("table4.csv"), &csv)
    }

    fn write_manifest(&self) -> Result<()> {
        let manifest = serde_json::json!({
            "config_hash": self.config_hash,
            "config": serde_json::to_value(&self.cfg)?,
            "version": env!("CARGO_PKG_VERSION"),
            "created_unix": std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        });
        write_text(
            self.cfg.out_dir.join("manifest.json"),
            &serde_json::to_string_pretty(&manifest)?,
        )
    }
}

/// Standalone backend comparison against existing models (missing
/// checkpoints are skipped with a note).
pub fn compare_backends(config_path: &Path) -> Result<()> {
    let (cfg, hash) = ExperimentConfig::load(config_path)?;
    let p = Pipeline::new(cfg, hash);
    if !p.stage_done("gen-data")? || !p.stage_done("train-fsa")? {
        bail!("compare-backends needs the pipeline's gen-data and train-fsa stages first");
    }
    p.stage_compare_backends(true)
}

pub fn run_pipeline(config_path: &Path) -> Result<()> {
    let (cfg, hash) = ExperimentConfig::load(config_path)?;
    Pipeline::new(cfg, hash).run()
}
