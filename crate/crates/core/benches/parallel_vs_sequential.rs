use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hazardlens::causal::{causal_hr_mc_with, gen_coupled_with, CouplingSpec};
use hazardlens::curve::linspace;
use hazardlens::data::pairs_to_dataset;
use hazardlens::estimate::{cox_fit, rr_curve_with, CovariateSelector};
use hazardlens::simlab::{run_experiment_with, ExperimentConfig};
use hazardlens::{Exec, SeedSpec};

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn generation(c: &mut Criterion) {
    let spec = CouplingSpec::GammaShared { beta: 0.5f64.ln(), theta: 0.5 };
    let mut g = c.benchmark_group("gen_coupled_200k");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| gen_coupled_with(&spec, 200_000, SeedSpec::new(1, 0), exec).unwrap())
        });
    }
    g.finish();
}

fn stratum_hazards(c: &mut Criterion) {
    let spec = CouplingSpec::GammaShared { beta: 0.5f64.ln(), theta: 2.0 };
    let pairs = gen_coupled_with(&spec, 200_000, SeedSpec::new(2, 0), Exec::Sequential).unwrap();
    let grid = linspace(0.0, 2.0, 41);
    let mut g = c.benchmark_group("causal_hr_mc_41pts");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| causal_hr_mc_with(&pairs, &grid, 0.05, exec).unwrap())
        });
    }
    g.finish();
}

fn bootstrap(c: &mut Criterion) {
    let spec = CouplingSpec::GammaShared { beta: 0.5f64.ln(), theta: 0.0 };
    let data = pairs_to_dataset(&gen_coupled_with(&spec, 500, SeedSpec::new(3, 0), Exec::Sequential).unwrap());
    let selector = CovariateSelector::arm_only();
    let fit = cox_fit(&data, &selector).unwrap();
    let grid = linspace(0.1, 1.5, 15);
    let mut g = c.benchmark_group("rr_bootstrap_200");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| rr_curve_with(&data, &fit, &selector, &grid, 0.95, 200, SeedSpec::new(4, 0), exec).unwrap())
        });
    }
    g.finish();
}

fn replicates(c: &mut Criterion) {
    let config = ExperimentConfig::parse(ExperimentConfig::bundled("sim31").unwrap())
        .unwrap()
        .with_override("n", "2000")
        .unwrap()
        .with_override("replicates", "8")
        .unwrap();
    let mut g = c.benchmark_group("sim31_8x2000");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_experiment_with(&config, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, generation, stratum_hazards, bootstrap, replicates);
criterion_main!(benches);
