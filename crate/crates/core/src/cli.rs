//! Experiment runner and the command implementations behind the `mcnn` binary.
//!
//! Experiments are described in TOML:
//!
//! ```toml
//! seed = 7            # master seed: candidate seeds and fold split
//! family = "MM"       # SS, SM, MS, MM, S or M (full labels like "MCNN-MM" also work)
//! candidates = 8      # sampled multi-function candidates
//! baselines = true    # add one uniform network per pool function
//! folds = 3           # stratified folds; 1 means a train/test holdout
//! workers = 0         # 0 = all cores; MCNN_WORKERS and --workers override
//! granularity = "slot" # or "layer": one function per activation layer
//!
//! [data]
//! source = "synthetic"          # or "mnist"
//! classes = 4
//! per_class = 60
//! height = 12
//! width = 12
//! # mnist: dir = "data/mnist", train_limit = 10000, test_limit = 2000
//!
//! [topology]
//! blocks = [{ channels = 4, kernel = 3, padding = 1, pool = 2 }]
//! fc_hidden = [16]
//!
//! [pools]
//! al = ["REL", "SIG", "TAN"]
//! fc = ["REL", "SIG", "TAN"]
//!
//! [train]
//! epochs = 3
//! batch_size = 32
//! learning_rate = 0.05
//!
//! [output]
//! csv = "results.csv"
//! markdown = "results.md"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::activations::ActivationKind;
use crate::data::{load_idx, stratified_kfold, synth_classes, LabeledDataset};
use crate::error::{Error, Result};
use crate::gradcheck::{run_suite, tiny_block_instance};
use crate::inception::{
    assign_paths, build_inception_a, parse_path_layout, print_assignment, InceptionBlock, PathLayout,
};
use crate::model_space::{build_mcnn, count_families, AssignGranularity, AssignmentPlan, ConvBlockSpec, Topology};
use crate::network::{Family, NetworkSpec};
use crate::train_eval::{cross_validate, holdout_evaluate, rank_candidates, Candidate, RankedTable, TrainConfig};

pub const WORKERS_ENV: &str = "MCNN_WORKERS";

pub const CSV_HEADER: [&str; 10] = [
    "rank",
    "family",
    "spec",
    "train_acc",
    "test_acc",
    "train_f1",
    "test_f1",
    "seed",
    "epochs",
    "folds",
];

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub family: String,
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    #[serde(default = "yes")]
    pub baselines: bool,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub granularity: GranularityName,
    pub data: DataConfig,
    pub topology: TopologyConfig,
    pub pools: PoolsConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_candidates() -> usize {
    8
}

fn default_folds() -> usize {
    3
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum GranularityName {
    #[default]
    Slot,
    Layer,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataConfig {
    Synthetic {
        classes: usize,
        per_class: usize,
        height: usize,
        width: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Mnist {
        #[serde(default)]
        dir: Option<PathBuf>,
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub blocks: Vec<ConvBlockSpec>,
    #[serde(default)]
    pub fc_hidden: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolsConfig {
    pub al: Vec<String>,
    #[serde(default)]
    pub fc: Vec<String>,
}

/// Training settings; the seed comes from each candidate.
#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub shuffle: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            shuffle: d.shuffle,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub markdown: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.message().to_string()))
    }

    /// Reads a config file and resolves its relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataConfig::Mnist { dir: Some(d), .. } = &mut cfg.data {
            resolve(d);
        }
        for p in [&mut cfg.output.csv, &mut cfg.output.markdown].into_iter().flatten() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn family(&self) -> Result<Family> {
        self.family
            .parse()
            .map_err(|_| Error::config_field("family", format!("unknown family `{}`", self.family)))
    }

    fn pool(field: &str, names: &[String]) -> Result<Vec<ActivationKind>> {
        names
            .iter()
            .map(|n| {
                n.parse::<ActivationKind>()
                    .map_err(|_| Error::config_field(field, format!("unknown activation function `{n}`")))
            })
            .collect()
    }

    pub fn al_pool(&self) -> Result<Vec<ActivationKind>> {
        Self::pool("pools.al", &self.pools.al)
    }

    /// The FC pool, defaulting to the AL pool when empty.
    pub fn fc_pool(&self) -> Result<Vec<ActivationKind>> {
        if self.pools.fc.is_empty() {
            self.al_pool()
        } else {
            Self::pool("pools.fc", &self.pools.fc)
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            seed,
            shuffle: self.train.shuffle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.family()?;
        self.al_pool()?;
        self.fc_pool()?;
        self.train_config(0).validate()?;
        if self.folds == 0 {
            return Err(Error::config_field("folds", "must be at least 1"));
        }
        if self.topology.blocks.is_empty() {
            return Err(Error::config_field(
                "topology.blocks",
                "at least one conv block is required",
            ));
        }
        Ok(())
    }
}

/// Default MNIST location: `$MCNN_MNIST_DIR`, else `data/mnist` under the workspace root.
pub fn default_mnist_dir() -> PathBuf {
    std::env::var_os("MCNN_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

/// Finds `<stem>` or `<stem>.gz` in `dir`.
fn idx_file(dir: &Path, stem: &str) -> Result<PathBuf> {
    let plain = dir.join(stem);
    let gz = dir.join(format!("{stem}.gz"));
    if plain.exists() {
        Ok(plain)
    } else if gz.exists() {
        Ok(gz)
    } else {
        Err(Error::Data(format!("{} not found (also tried .gz)", plain.display())))
    }
}

/// MNIST training and test sets from a directory of (optionally gzipped) IDX files.
pub fn load_mnist(dir: &Path) -> Result<(LabeledDataset, LabeledDataset)> {
    let train = load_idx(
        idx_file(dir, "train-images-idx3-ubyte")?,
        idx_file(dir, "train-labels-idx1-ubyte")?,
    )?;
    let test = load_idx(
        idx_file(dir, "t10k-images-idx3-ubyte")?,
        idx_file(dir, "t10k-labels-idx1-ubyte")?,
    )?;
    Ok((train, test))
}

/// Training data and, for holdout evaluation, a separate test set.
fn load_data(cfg: &ExperimentConfig) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
    match &cfg.data {
        DataConfig::Synthetic {
            classes,
            per_class,
            height,
            width,
            seed,
        } => {
            let ds = synth_classes(*classes, *per_class, *height, *width, seed.unwrap_or(cfg.seed))?;
            if cfg.folds == 1 {
                let (train, test) = ds.split_holdout(0.15, cfg.seed)?;
                Ok((train, Some(test)))
            } else {
                Ok((ds, None))
            }
        }
        DataConfig::Mnist {
            dir,
            train_limit,
            test_limit,
        } => {
            let dir = dir.clone().unwrap_or_else(default_mnist_dir);
            let (train, test) = load_mnist(&dir)?;
            let train = match train_limit {
                Some(n) => train.take(*n),
                None => train,
            };
            let test = match test_limit {
                Some(n) => test.take(*n),
                None => test,
            };
            Ok((train, (cfg.folds == 1).then_some(test)))
        }
    }
}

/// One uniform network per function in the multi-function pool(s). The other
/// side keeps the function when its pool has it, else uses its pool's first.
/// All-LIN networks are skipped.
fn baseline_specs(
    topology: &Topology,
    family: Family,
    al_pool: &[ActivationKind],
    fc_pool: &[ActivationKind],
) -> Result<Vec<NetworkSpec>> {
    let mut functions: Vec<ActivationKind> = Vec::new();
    let mut sources: Vec<&[ActivationKind]> = Vec::new();
    if family.multi_al() || !family.multi_fc() {
        sources.push(al_pool);
    }
    if family.has_fc() && family.multi_fc() {
        sources.push(fc_pool);
    }
    for k in sources.into_iter().flatten() {
        if !functions.contains(k) {
            functions.push(*k);
        }
    }
    let mut out = Vec::new();
    for f in functions {
        let al = if al_pool.contains(&f) { f } else { al_pool[0] };
        let fc = if fc_pool.contains(&f) { f } else { fc_pool[0] };
        let spec = topology.uniform(al, fc, 0)?;
        if !spec.is_all_linear() {
            out.push(spec);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub table: RankedTable,
    pub csv: String,
    pub markdown: String,
    pub epochs: usize,
    pub folds: usize,
}

/// Builds, trains, evaluates, and ranks all candidates. Candidates run on a
/// pool of `workers` threads; results are merged by candidate index.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let family = cfg.family()?;
    let (al_pool, fc_pool) = (cfg.al_pool()?, cfg.fc_pool()?);
    let (data, holdout) = load_data(cfg)?;
    let topology = Topology {
        input: data.image_shape(),
        blocks: cfg.topology.blocks.clone(),
        fc_hidden: cfg.topology.fc_hidden.clone(),
        classes: data.classes(),
    };
    if family.has_fc() == topology.fc_hidden.is_empty() {
        return Err(Error::config_field(
            "topology.fc_hidden",
            format!(
                "{family} {} FC hidden layers",
                if family.has_fc() { "needs" } else { "has no" }
            ),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut jobs: Vec<(NetworkSpec, u64)> = Vec::new();
    if cfg.baselines || !family.is_mcnn() {
        for spec in baseline_specs(&topology, family, &al_pool, &fc_pool)? {
            let seed = rng.gen();
            jobs.push((spec.with_seed(seed), seed));
        }
    }
    if family.is_mcnn() {
        let granularity = match cfg.granularity {
            GranularityName::Slot => AssignGranularity::Slot,
            GranularityName::Layer => AssignGranularity::Layer,
        };
        for _ in 0..cfg.candidates {
            let seed = rng.gen();
            let plan = AssignmentPlan {
                topology: topology.clone(),
                al_pool: al_pool.clone(),
                fc_pool: fc_pool.clone(),
                family,
                granularity,
                seed,
            };
            jobs.push((build_mcnn(&plan)?, seed));
        }
    }

    let plan = if holdout.is_none() {
        Some(stratified_kfold(&data, cfg.folds, cfg.seed)?)
    } else {
        None
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Candidate>> = pool.install(|| {
        jobs.par_iter()
            .map(|(spec, seed)| {
                let tc = cfg.train_config(*seed);
                let report = match (&plan, &holdout) {
                    (Some(p), _) => cross_validate(spec, &data, p, &tc),
                    (None, Some(test)) => holdout_evaluate(spec, &data, test, &tc),
                    (None, None) => unreachable!("either folds or a holdout set"),
                };
                let report = match report {
                    Ok(r) => Some(r),
                    Err(Error::Divergence { .. }) => None,
                    Err(e) => return Err(e),
                };
                Ok(Candidate {
                    spec: spec.clone(),
                    seed: *seed,
                    report,
                })
            })
            .collect()
    });
    let candidates = results.into_iter().collect::<Result<Vec<_>>>()?;
    let table = rank_candidates(candidates);
    let folds = plan.as_ref().map_or(1, |p| p.k);
    let csv = render_csv(&table, cfg.train.epochs, folds)?;
    let markdown = render_markdown(&table);
    Ok(ExperimentOutput {
        table,
        csv,
        markdown,
        epochs: cfg.train.epochs,
        folds,
    })
}

pub fn render_csv(table: &RankedTable, epochs: usize, folds: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| Error::Internal(e.to_string()))?;
    for row in &table.rows {
        let metric = |f: fn(&crate::train_eval::EvalReport) -> f64| {
            row.report.as_ref().map(|r| format!("{:.6}", f(r))).unwrap_or_default()
        };
        w.write_record([
            row.rank.to_string(),
            row.family.label().to_string(),
            row.spec_text.clone(),
            metric(|r| r.train_accuracy),
            metric(|r| r.test_accuracy),
            metric(|r| r.train_f1),
            metric(|r| r.test_f1),
            row.seed.to_string(),
            epochs.to_string(),
            folds.to_string(),
        ])
        .map_err(|e| Error::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

/// Markdown table with one column per activation layer (`AL1..`) and FC
/// hidden layer (`HL1..`), then the four metrics in percent. MCNN rows are bold.
pub fn render_markdown(table: &RankedTable) -> String {
    let mut out = String::new();
    let Some(first) = table.rows.first() else {
        return out;
    };
    let spec: NetworkSpec = first.spec_text.parse().expect("rendered specs parse");
    let (al, fc) = spec.layer_labels();
    let mut header: Vec<String> = (1..=al.len()).map(|i| format!("AL{i}")).collect();
    header.extend((1..=fc.len()).map(|i| format!("HL{i}")));
    header.extend(["Train Acc", "Test Acc", "Train F1", "Test F1"].map(String::from));
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for row in &table.rows {
        let spec: NetworkSpec = row.spec_text.parse().expect("rendered specs parse");
        let (al, fc) = spec.layer_labels();
        let mut cells: Vec<String> = al.into_iter().chain(fc).collect();
        match &row.report {
            Some(r) => cells.extend(
                [r.train_accuracy, r.test_accuracy, r.train_f1, r.test_f1].map(|v| format!("{:.3}", 100.0 * v)),
            ),
            None => cells.extend(["diverged", "", "", ""].map(String::from)),
        }
        if row.is_mcnn {
            for c in cells.iter_mut().filter(|c| !c.is_empty()) {
                *c = format!("**{c}**");
            }
        }
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out
}

/// Worker count: explicit flag, then `MCNN_WORKERS`, then the config, then all cores.
pub fn resolve_workers(flag: Option<usize>, config: usize) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return v
            .trim()
            .parse()
            .map_err(|_| Error::config_field(WORKERS_ENV, format!("expected a worker count, got `{v}`")));
    }
    if config > 0 {
        return Ok(config);
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Both model-space tables for the given sizes.
pub fn run_counting(j: u32, k: u32, m: u32, n: u32) -> Result<String> {
    Ok(count_families(j, k, m, n)?.render_tables())
}

/// Block tree, shape report, path assignment, and a tiny-scale gradient check.
pub fn run_inception_demo(scale: f64, pool: &[ActivationKind], seed: u64, paths: Option<&str>) -> Result<String> {
    let mut out = String::new();
    let mut blocks: Vec<(String, InceptionBlock, usize)> = Vec::new();
    let placeholder = [pool.first().copied().unwrap_or(ActivationKind::Rel); 4];
    blocks.push(("Inception-A".into(), build_inception_a(384, scale, &placeholder)?, 384));
    if let Some(text) = paths {
        let layout = parse_path_layout(text)?;
        let kinds = vec![placeholder[0]; layout.len()];
        blocks.push((
            "Custom block".into(),
            InceptionBlock::from_layout(384, scale, &layout, &kinds)?,
            384,
        ));
    }
    let layout = PathLayout::of_blocks(&blocks.iter().map(|b| b.1.clone()).collect::<Vec<_>>());
    let assignment = assign_paths(&layout, pool, seed, false)?;
    let assigned = assignment.apply(&blocks.iter().map(|b| b.1.clone()).collect::<Vec<_>>(), pool)?;
    let _ = writeln!(
        out,
        "pool: {}",
        pool.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(out, "path assignment: {}\n", print_assignment(&assignment));
    for ((name, _, channels), block) in blocks.iter().zip(&assigned) {
        let _ = writeln!(out, "{name}\n{block}");
        let _ = writeln!(out, "{}", block.shape_report([*channels, 35, 35])?);
        let tiny = InceptionBlock::from_layout(
            2,
            1.0,
            &tiny_layout(block),
            &block
                .paths()
                .iter()
                .map(|p| p.kind().unwrap_or(ActivationKind::Rel))
                .collect::<Vec<_>>(),
        )?;
        let (err, _, _) = tiny_block_instance(&tiny, seed)?;
        let _ = writeln!(
            out,
            "gradient check (2 input channels, 1-2 channels per CB, 8x8 input): max relative error {err:.3e}\n"
        );
    }
    Ok(out)
}

/// Same stages with CB widths reduced to 1 or 2 channels.
fn tiny_layout(block: &InceptionBlock) -> Vec<Vec<crate::inception::Stage>> {
    use crate::inception::Stage;
    block
        .paths()
        .iter()
        .map(|p| {
            p.stages()
                .iter()
                .map(|s| match *s {
                    Stage::Cb {
                        kernel,
                        out_channels,
                        stride,
                        padding,
                    } => Stage::Cb {
                        kernel,
                        out_channels: out_channels.clamp(1, 2),
                        stride,
                        padding,
                    },
                    pool => pool,
                })
                .collect()
        })
        .collect()
}

/// Finite-difference report for networks and inception blocks.
pub fn run_gradcheck(instances: usize, seed: u64) -> Result<(String, bool)> {
    let reports = run_suite(instances, seed)?;
    let mut out = String::new();
    let mut ok = true;
    for r in &reports {
        let pass = r.max_rel_error < 1e-4;
        ok &= pass;
        let _ = writeln!(
            out,
            "{:<40} instances {:>3}  params {:>4}  max rel error {:.3e}  {}",
            r.name,
            r.instances,
            r.parameters,
            r.max_rel_error,
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok((out, ok))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"
seed = 3
family = "MM"
candidates = 2
folds = 2

[data]
source = "synthetic"
classes = 3
per_class = 6
height = 6
width = 6

[topology]
blocks = [{ channels = 2, kernel = 3, padding = 1, pool = 2 }]
fc_hidden = [3]

[pools]
al = ["REL", "SIG"]

[train]
epochs = 1
batch_size = 4
"#;

    #[test]
    fn small_experiment_runs() {
        let cfg = ExperimentConfig::from_toml(CONFIG).unwrap();
        let out = run_experiment(&cfg, 1).unwrap();
        assert_eq!(out.table.rows.len(), 4);
        assert!(out.table.is_sorted());
        let mut lines = out.csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.count(), 4);
        assert!(out.markdown.starts_with("| AL1 | HL1 | Train Acc"));
        for row in &out.table.rows {
            let spec: NetworkSpec = row.spec_text.parse().unwrap();
            assert_eq!(spec.family(), row.family);
        }
        let again = run_experiment(&cfg, 2).unwrap();
        assert_eq!(out.csv, again.csv);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            ExperimentConfig::from_toml("seed = 1"),
            Err(Error::Config { .. })
        ));
        let cfg = ExperimentConfig::from_toml(&CONFIG.replace("\"MM\"", "\"XX\"")).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        let cfg = ExperimentConfig::from_toml(&CONFIG.replace("\"SIG\"", "\"FOO\"")).unwrap();
        assert!(matches!(run_experiment(&cfg, 1), Err(Error::Config { .. })));
        let cfg = ExperimentConfig::from_toml(&CONFIG.replace("\"MM\"", "\"M\"")).unwrap();
        assert!(matches!(run_experiment(&cfg, 1), Err(Error::Config { .. })));
    }

    #[test]
    fn baselines_cover_the_pools() {
        use ActivationKind::*;
        let topo = Topology {
            input: [1, 4, 4],
            blocks: vec![ConvBlockSpec {
                channels: 2,
                kernel: 1,
                stride: 1,
                padding: 0,
                pool: None,
            }],
            fc_hidden: vec![5],
            classes: 2,
        };
        let specs = baseline_specs(&topo, Family::McnnSm, &[Rel], &[Rel, Lin, Pls]).unwrap();
        let labels: Vec<String> = specs.iter().map(|s| s.descriptor()).collect();
        assert_eq!(labels, vec!["REL-REL", "REL-LIN", "REL-PLS"]);
        let specs = baseline_specs(&topo, Family::McnnMs, &[Lin, Sig], &[Lin]).unwrap();
        assert_eq!(specs.len(), 1);
    }

    #[test]
    fn counting_and_demo_output() {
        let text = run_counting(6, 6, 3, 5).unwrap();
        assert!(text.contains("46,620"));
        let demo = run_inception_demo(1.0 / 16.0, &[ActivationKind::Rel], 0, None).unwrap();
        assert!(demo.contains("path assignment: (1, 1, 1, 1)"));
        assert!(demo.contains("Path 4: 1×1 CB(REL) → 3×3 CB(REL) → 3×3 CB(REL)"));
    }
}
