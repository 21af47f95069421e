//! `synth`: writes synthetic streams with planted ED trajectories plus their
//! manifest, for validating the pipeline without a model.
//!
//! Outputs: `manifest.jsonl`, `streams/gen_NNNNN.edls`, and `planted.jsonl`
//! holding each generation's planted mean ED.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use edprof::synth::{plan, write_generation, SynthConfig};
use edprof::Manifest;
use rayon::prelude::*;
use serde::Serialize;

use super::{ensure_dir, pool, write_jsonl};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub config: SynthConfig,
    pub out: PathBuf,
    pub jobs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Planted {
    pub generation_index: u32,
    pub temperature: f64,
    pub planted_mean: f64,
}

#[derive(Debug, Clone)]
pub struct SynthReport {
    pub manifest_path: PathBuf,
    pub generations: usize,
    pub bytes: u64,
}

pub fn cmd_synth(opts: &SynthOptions) -> Result<SynthReport, CliError> {
    let planned = plan(&opts.config)?;
    ensure_dir(&opts.out.join("streams"))?;
    let sizes: Vec<u64> = pool(opts.jobs)?.install(|| {
        planned
            .par_iter()
            .map(|p| {
                let path = opts.out.join(&p.row.stream_path);
                let file = File::create(&path).map_err(CliError::io(&path))?;
                let (mut w, bytes) = write_generation(&opts.config, p, BufWriter::new(file))?;
                w.flush().map_err(CliError::io(&path))?;
                Ok(bytes)
            })
            .collect::<Result<_, CliError>>()
    })?;
    let manifest_path = opts.out.join("manifest.jsonl");
    Manifest::new(planned.iter().map(|p| p.row.clone()).collect())?.write_jsonl(&manifest_path)?;
    let planted: Vec<Planted> = planned
        .iter()
        .map(|p| Planted {
            generation_index: p.row.generation_index,
            temperature: p.row.temperature,
            planted_mean: p.planted_mean,
        })
        .collect();
    write_jsonl(&opts.out.join("planted.jsonl"), &planted)?;
    Ok(SynthReport {
        manifest_path,
        generations: planned.len(),
        bytes: sizes.iter().sum(),
    })
}
