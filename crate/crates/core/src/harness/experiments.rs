//! The two headline experiments: domain adaptation and device scalability.
//!
//! Protocol: every (device, domain) cell of the dataset is split 90/10
//! once, by position within the cell, so the raw-IQ and VFDT datasets
//! built from the same seed split identically (paired comparison). Models
//! train on the union of the training domains' 90% slices and are
//! evaluated on each domain's held-out 10% slice.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dataset::{
    build_dataset, experiment_vfdt_config, Representation, SynthesisConfig,
};
use super::population::generate_population;
use super::report::{CellReport, ExperimentReport};
use crate::channel::ChannelProfile;
use crate::classifier::{
    evaluate, train_on, CnnConfig, LabeledExample, TrainConfig, TrainHistory, TrainedModel,
};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, rng_from};
use crate::vfdt::VfdtConfig;

/// Everything a harness run needs, serializable as the CLI's `--spec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub population_size: usize,
    pub frames_per_device_per_domain: usize,
    pub train_domains: Vec<String>,
    pub test_domains: Vec<String>,
    /// Representation for single-representation runs (train/eval/scale);
    /// the domain-adaptation experiment always runs both.
    pub representation: Representation,
    #[serde(default)]
    pub device_subset_sizes: Option<Vec<usize>>,
    pub population_seed: u64,
    pub data_seed: u64,
    pub model_seed: u64,
    #[serde(default = "experiment_vfdt_config")]
    pub vfdt_config: VfdtConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    /// Architecture override; `num_classes` is set per run from the
    /// device count. Defaults to the standard stack when absent.
    #[serde(default)]
    pub cnn_config: Option<CnnConfig>,
    #[serde(default)]
    pub train_config: TrainConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            population_size: 10,
            frames_per_device_per_domain: 200,
            train_domains: vec!["D1".into()],
            test_domains: vec!["D1".into(), "D2".into(), "D3".into(), "R1".into(), "R2".into()],
            representation: Representation::Vfdt,
            device_subset_sizes: None,
            population_seed: 7,
            data_seed: 11,
            model_seed: 13,
            vfdt_config: experiment_vfdt_config(),
            synthesis: SynthesisConfig::default(),
            cnn_config: None,
            train_config: TrainConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self, domains: &[ChannelProfile]) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::validation("population_size must be >= 2"));
        }
        if self.frames_per_device_per_domain < 2 {
            return Err(Error::validation("frames_per_device_per_domain must be >= 2"));
        }
        if self.train_domains.is_empty() || self.test_domains.is_empty() {
            return Err(Error::validation("train and test domain lists must be non-empty"));
        }
        let known: Vec<&str> = domains.iter().map(|d| d.domain_id.as_str()).collect();
        for id in self.train_domains.iter().chain(self.test_domains.iter()) {
            if !known.contains(&id.as_str()) {
                return Err(Error::validation(format!(
                    "domain {id} is not in the loaded domain set {known:?}"
                )));
            }
        }
        if let Some(sizes) = &self.device_subset_sizes {
            if sizes.is_empty() || sizes.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::validation("device_subset_sizes must be ascending"));
            }
            if *sizes.last().unwrap() > self.population_size {
                return Err(Error::validation("subset size exceeds population_size"));
            }
            if sizes[0] < 2 {
                return Err(Error::validation("smallest subset must hold >= 2 devices"));
            }
        }
        self.vfdt_config.validate()?;
        self.train_config.validate()?;
        Ok(())
    }

    /// Domains the spec touches, in the domain set's order.
    pub fn domains_in_use(&self, domains: &[ChannelProfile]) -> Vec<ChannelProfile> {
        domains
            .iter()
            .filter(|d| {
                self.train_domains.contains(&d.domain_id)
                    || self.test_domains.contains(&d.domain_id)
            })
            .cloned()
            .collect()
    }

    fn cnn_for(&self, num_classes: usize) -> CnnConfig {
        match &self.cnn_config {
            Some(cfg) => {
                let mut c = cfg.clone();
                c.num_classes = num_classes;
                c
            }
            None => CnnConfig::default_for(num_classes, self.model_seed),
        }
    }
}

/// Positional 90/10 split per (device, domain) cell. Depends only on the
/// labels and the seed, never the feature values, so datasets that differ
/// only in representation split identically.
pub fn paired_split(
    dataset: &[LabeledExample],
    train_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<(usize, &str), Vec<usize>> = BTreeMap::new();
    for (i, e) in dataset.iter().enumerate() {
        groups.entry((e.device_label, e.domain_label.as_str())).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for ((device, domain), mut members) in groups {
        let mut rng = rng_from(seed, &[0x70737065, device as u64, fnv1a(domain.as_bytes())]);
        for i in (1..members.len()).rev() {
            let j = rand::Rng::gen_range(&mut rng, 0..=i);
            members.swap(i, j);
        }
        let n_train =
            ((members.len() as f64 * train_fraction).floor() as usize).min(members.len() - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    (train, test)
}

struct TrainedCellModel {
    model: TrainedModel,
    history: TrainHistory,
}

/// Train on the union of `train_domains`' training slices; the history's
/// per-epoch test accuracy comes from those domains' held-out slices.
fn train_for_domains(
    dataset: &[LabeledExample],
    train_idx: &[usize],
    test_idx: &[usize],
    train_domains: &[String],
    cnn: &CnnConfig,
    tc: &TrainConfig,
) -> Result<TrainedCellModel> {
    let in_train_domains =
        |i: &usize| train_domains.contains(&dataset[*i].domain_label);
    let train_set: Vec<LabeledExample> =
        train_idx.iter().filter(|i| in_train_domains(i)).map(|&i| dataset[i].clone()).collect();
    let history_eval: Vec<LabeledExample> =
        test_idx.iter().filter(|i| in_train_domains(i)).map(|&i| dataset[i].clone()).collect();
    let (model, history) = train_on(&train_set, &history_eval, cnn, tc)?;
    Ok(TrainedCellModel { model, history })
}

fn eval_cells(
    dataset: &[LabeledExample],
    test_idx: &[usize],
    trained: &TrainedCellModel,
    spec_train_domains: &[String],
    test_domains: &[String],
    representation: Representation,
    n_devices: usize,
) -> Result<Vec<CellReport>> {
    let mut cells = Vec::new();
    for td in test_domains {
        let eval_set: Vec<LabeledExample> = test_idx
            .iter()
            .filter(|&&i| &dataset[i].domain_label == td)
            .map(|&i| dataset[i].clone())
            .collect();
        if eval_set.is_empty() {
            return Err(Error::validation(format!("no held-out examples for domain {td}")));
        }
        let eval = evaluate(&trained.model, &eval_set)?;
        cells.push(CellReport {
            train_domains: spec_train_domains.to_vec(),
            test_domain: td.clone(),
            representation,
            n_devices,
            accuracy: eval.accuracy,
            confusion: eval.confusion,
            epoch_train_accuracy: trained.history.train_accuracy.clone(),
            epoch_test_accuracy: trained.history.test_accuracy.clone(),
        });
    }
    Ok(cells)
}

/// Train on the spec's training domains and evaluate on every test
/// domain, for both representations on identical transmissions.
pub fn run_domain_adaptation(
    spec: &ExperimentSpec,
    domains: &[ChannelProfile],
) -> Result<ExperimentReport> {
    let started = Instant::now();
    spec.validate(domains)?;
    let population = generate_population(spec.population_size, spec.population_seed)?;
    let in_use = spec.domains_in_use(domains);
    let cnn = spec.cnn_for(spec.population_size);

    let mut cells = Vec::new();
    for representation in [Representation::RawIq, Representation::Vfdt] {
        let dataset = build_dataset(
            &population,
            &in_use,
            spec.frames_per_device_per_domain,
            representation,
            &spec.vfdt_config,
            &spec.synthesis,
            spec.data_seed,
        )?;
        let (train_idx, test_idx) =
            paired_split(&dataset, spec.train_config.train_fraction, spec.train_config.seed);
        let trained = train_for_domains(
            &dataset,
            &train_idx,
            &test_idx,
            &spec.train_domains,
            &cnn,
            &spec.train_config,
        )?;
        cells.extend(eval_cells(
            &dataset,
            &test_idx,
            &trained,
            &spec.train_domains,
            &spec.test_domains,
            representation,
            spec.population_size,
        )?);
    }
    Ok(ExperimentReport::new(spec.clone(), cells, started.elapsed().as_secs_f64()))
}

/// Train on nested device subsets of ascending size and evaluate each on
/// every test domain, in the spec's single representation.
pub fn run_scalability(
    spec: &ExperimentSpec,
    domains: &[ChannelProfile],
) -> Result<ExperimentReport> {
    let started = Instant::now();
    spec.validate(domains)?;
    let sizes = spec
        .device_subset_sizes
        .clone()
        .ok_or_else(|| Error::validation("scalability run needs device_subset_sizes"))?;
    let population = generate_population(spec.population_size, spec.population_seed)?;
    let in_use = spec.domains_in_use(domains);

    let dataset = build_dataset(
        &population,
        &in_use,
        spec.frames_per_device_per_domain,
        spec.representation,
        &spec.vfdt_config,
        &spec.synthesis,
        spec.data_seed,
    )?;

    let mut cells = Vec::new();
    for &size in &sizes {
        // Nested prefixes of the population's canonical order.
        let subset: Vec<LabeledExample> =
            dataset.iter().filter(|e| e.device_label < size).cloned().collect();
        let (train_idx, test_idx) =
            paired_split(&subset, spec.train_config.train_fraction, spec.train_config.seed);
        let cnn = spec.cnn_for(size);
        let trained = train_for_domains(
            &subset,
            &train_idx,
            &test_idx,
            &spec.train_domains,
            &cnn,
            &spec.train_config,
        )?;
        cells.extend(eval_cells(
            &subset,
            &test_idx,
            &trained,
            &spec.train_domains,
            &spec.test_domains,
            spec.representation,
            size,
        )?);
    }
    Ok(ExperimentReport::new(spec.clone(), cells, started.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::standard_domains;

    fn tiny_spec() -> ExperimentSpec {
        let mut cnn = CnnConfig::default_for(4, 13);
        for b in cnn.conv_blocks.iter_mut() {
            b.out_channels = 4;
            b.kernel_w = 3;
        }
        cnn.fc_widths = vec![16, 12, 8];
        ExperimentSpec {
            population_size: 4,
            frames_per_device_per_domain: 8,
            train_domains: vec!["D1".into()],
            test_domains: vec!["D1".into(), "D2".into()],
            cnn_config: Some(cnn),
            train_config: TrainConfig { epochs: 2, ..TrainConfig::default() },
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn domain_adaptation_report_shape() {
        let spec = tiny_spec();
        let report = run_domain_adaptation(&spec, &standard_domains()).unwrap();
        // 2 representations x 2 test domains.
        assert_eq!(report.cells.len(), 4);
        for cell in &report.cells {
            assert!((0.0..=1.0).contains(&cell.accuracy));
            let trace: u64 = (0..cell.confusion.len()).map(|i| cell.confusion[i][i]).sum();
            let total: u64 = cell.confusion.iter().flatten().sum();
            assert!((cell.accuracy - trace as f64 / total as f64).abs() < 1e-12);
            assert_eq!(cell.epoch_test_accuracy.len(), 2);
        }
        for rep in [Representation::RawIq, Representation::Vfdt] {
            for dom in ["D1", "D2"] {
                assert!(report.cell(rep, dom).is_some());
            }
        }
    }

    #[test]
    fn reports_are_reproducible_modulo_wall_time() {
        let spec = tiny_spec();
        let a = run_domain_adaptation(&spec, &standard_domains()).unwrap();
        let b = run_domain_adaptation(&spec, &standard_domains()).unwrap();
        assert_eq!(a.canonical_json().unwrap(), b.canonical_json().unwrap());
    }

    #[test]
    fn scalability_cells_are_nested_and_tagged() {
        let mut spec = tiny_spec();
        spec.device_subset_sizes = Some(vec![2, 3, 4]);
        spec.test_domains = vec!["D1".into()];
        let report = run_scalability(&spec, &standard_domains()).unwrap();
        assert_eq!(report.cells.len(), 3);
        let sizes: Vec<usize> = report.cells.iter().map(|c| c.n_devices).collect();
        assert_eq!(sizes, vec![2, 3, 4]);
        for c in &report.cells {
            assert_eq!(c.confusion.len(), c.n_devices);
        }
    }

    #[test]
    fn paired_split_ignores_features() {
        let spec = tiny_spec();
        let domains = standard_domains();
        let population = generate_population(spec.population_size, spec.population_seed).unwrap();
        let in_use = spec.domains_in_use(&domains);
        let raw = build_dataset(
            &population,
            &in_use,
            spec.frames_per_device_per_domain,
            Representation::RawIq,
            &spec.vfdt_config,
            &spec.synthesis,
            spec.data_seed,
        )
        .unwrap();
        let vf = build_dataset(
            &population,
            &in_use,
            spec.frames_per_device_per_domain,
            Representation::Vfdt,
            &spec.vfdt_config,
            &spec.synthesis,
            spec.data_seed,
        )
        .unwrap();
        let (ta, ea) = paired_split(&raw, 0.9, 3);
        let (tb, eb) = paired_split(&vf, 0.9, 3);
        assert_eq!(ta, tb);
        assert_eq!(ea, eb);
    }

    #[test]
    fn spec_validation_catches_unknown_domains() {
        let mut spec = tiny_spec();
        spec.train_domains = vec!["D9".into()];
        assert!(spec.validate(&standard_domains()).is_err());
        let mut spec2 = tiny_spec();
        spec2.device_subset_sizes = Some(vec![3, 2]);
        assert!(spec2.validate(&standard_domains()).is_err());
    }
}
