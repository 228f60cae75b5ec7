use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{debug, info};
use serde::Serialize;
use sha2::{Digest, Sha256};
use unlearn_core::checkpoint::Checkpoint;
use unlearn_core::evaluation::ContextAnalysis;
use unlearn_core::pipeline::TrainedModel;
use unlearn_core::{json, read_dataset, run_pipeline, PipelineResult};

use crate::config::{resolve, Overrides, RunConfig};
use crate::CliError;

#[derive(Debug, Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
    bytes: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    input: InputRecord,
    started_at: String,
    finished_at: String,
    artifacts: Vec<String>,
}

/// Writes files under `root`, remembering them so a failed run can be undone.
struct ArtifactWriter {
    root: PathBuf,
    created_root: bool,
    written: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl ArtifactWriter {
    /// Creates `root` if needed and checks it is writable.
    fn open(root: &Path) -> Result<Self, CliError> {
        let created_root = !root.exists();
        fs::create_dir_all(root)
            .map_err(|e| CliError::io(format!("cannot create out-dir {}: {e}", root.display())))?;
        let probe = root.join(".unlearn-write-probe");
        fs::File::create(&probe)
            .and_then(|mut f| f.write_all(b"ok"))
            .map_err(|e| CliError::io(format!("out-dir {} is not writable: {e}", root.display())))?;
        let _ = fs::remove_file(&probe);
        Ok(Self {
            root: root.to_path_buf(),
            created_root,
            written: Vec::new(),
            dirs: Vec::new(),
        })
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn ensure_dir(&mut self, rel: &str) -> Result<PathBuf, CliError> {
        let dir = self.root.join(rel);
        if !dir.exists() {
            fs::create_dir_all(&dir)
                .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
            self.dirs.push(dir.clone());
        }
        Ok(dir)
    }

    fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        self.written.push(path.clone());
        fs::write(&path, bytes)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        debug!("wrote {}", path.display());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let text = json::to_string_pretty(value).map_err(CliError::from_core)?;
        self.write_bytes(rel, text.as_bytes())
    }

    fn artifacts(&self) -> Vec<String> {
        self.written.iter().map(|p| self.relative(p)).collect()
    }

    fn rollback(self) {
        for p in self.written.iter().rev() {
            let _ = fs::remove_file(p);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
        if self.created_root {
            let _ = fs::remove_dir(&self.root);
        }
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn scores_csv(row_ids: &[usize], scores: &[f64]) -> String {
    let mut out = String::from("row_id,propensity_score\n");
    for (id, s) in row_ids.iter().zip(scores) {
        out.push_str(&format!("{id},{}\n", fmt_f64(*s)));
    }
    out
}

fn kde_csv(ctx: &ContextAnalysis) -> Option<String> {
    let kde = ctx.kde.as_ref()?;
    let mut out = String::from("grid,density\n");
    for (g, d) in kde.grid.iter().zip(&kde.density) {
        out.push_str(&format!("{},{}\n", fmt_f64(*g), fmt_f64(*d)));
    }
    Some(out)
}

fn hist_csv(ctx: &ContextAnalysis) -> Option<String> {
    let h = ctx.histogram.as_ref()?;
    let mut out = String::from("bin_left,bin_right,count,normalized\n");
    for (i, (c, p)) in h.counts.iter().zip(&h.normalized).enumerate() {
        out.push_str(&format!(
            "{},{},{c},{}\n",
            fmt_f64(h.edges[i]),
            fmt_f64(h.edges[i + 1]),
            fmt_f64(*p)
        ));
    }
    Some(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

pub fn summary_table(result: &PipelineResult) -> String {
    let r = &result.report;
    let mut out = String::new();
    out.push_str(&format!("{:<16}{:>12}\n", "model", "rmse"));
    for (name, v) in [
        ("model1", r.rmse.model1),
        ("model2", r.rmse.model2),
        ("model3", r.rmse.model3),
    ] {
        out.push_str(&format!("{name:<16}{v:>12.6}\n"));
    }
    out.push_str(&format!("{:<16}{:>12}\n", "context", "overlap"));
    for (name, v) in [
        ("original", r.overlap.original),
        ("forget_matched", r.overlap.forget_matched),
        ("forget_random", r.overlap.forget_random),
    ] {
        out.push_str(&format!("{name:<16}{:>12}\n", fmt_opt(v)));
    }
    out
}

fn write_outputs(
    out: &mut ArtifactWriter,
    cfg: &RunConfig,
    result: &PipelineResult,
    covariate_names: &[String],
    row_ids: &[usize],
) -> Result<(), CliError> {
    out.write_json("report.json", &result.report)?;
    out.write_json("partition_matched.json", &result.partition_matched)?;
    out.write_json("partition_random.json", &result.partition_random)?;

    let models: [(&str, &TrainedModel); 3] = [
        ("model1", &result.model1),
        ("model2", &result.model2),
        ("model3", &result.model3),
    ];
    for (i, (name, m)) in models.iter().enumerate() {
        // scoring context is the full-data standardizer for every model
        let ckpt = Checkpoint::new(
            &m.params,
            &cfg.pipeline.train,
            m.final_loss(),
            &result.standardizer,
            covariate_names,
        );
        out.write_json(&format!("{name}.json"), &ckpt)?;
        out.write_bytes(
            &format!("scores_{name}.csv"),
            scores_csv(row_ids, &result.scores[i]).as_bytes(),
        )?;
    }

    out.ensure_dir("plots")?;
    for ctx in &result.report.contexts {
        let stem = format!("{}_{}", ctx.name, ctx.group.as_str());
        if let Some(csv) = kde_csv(ctx) {
            out.write_bytes(&format!("plots/kde_{stem}.csv"), csv.as_bytes())?;
        }
        if let Some(csv) = hist_csv(ctx) {
            out.write_bytes(&format!("plots/hist_{stem}.csv"), csv.as_bytes())?;
        }
    }
    Ok(())
}

pub fn cmd_run(
    data: &Path,
    config: Option<&PathBuf>,
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<(), CliError> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let cfg = resolve(config, overrides)?;
    let mut out = ArtifactWriter::open(out_dir)?;

    let result = (|| {
        let bytes = fs::read(data).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::io(format!("file not found: {}", data.display())),
            _ => CliError::io(format!("cannot read {}: {e}", data.display())),
        })?;
        let digest = hex::encode(Sha256::digest(&bytes));
        let dataset = read_dataset(bytes.as_slice(), &cfg.schema).map_err(CliError::from_core)?;
        info!(
            "loaded {} rows ({} treated, {} control)",
            dataset.len(),
            dataset.treated_count(),
            dataset.control_count()
        );
        let result = run_pipeline(&dataset, &cfg.pipeline).map_err(CliError::from_core)?;
        info!("model 1 final loss {}", result.model1.final_loss());

        write_outputs(&mut out, &cfg, &result, &dataset.covariate_names, &dataset.row_ids)?;
        let mut artifacts = out.artifacts();
        artifacts.push("manifest.json".into());
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: &cfg,
            input: InputRecord {
                path: data.display().to_string(),
                sha256: digest,
                bytes: bytes.len(),
            },
            started_at,
            finished_at: chrono::Utc::now().to_rfc3339(),
            artifacts,
        };
        out.write_json("manifest.json", &manifest)?;
        Ok(result)
    })();

    match result {
        Ok(result) => {
            print!("{}", summary_table(&result));
            Ok(())
        }
        Err(e) => {
            out.rollback();
            Err(e)
        }
    }
}
