//! Generators, reference oracles and criterion runners shared by the
//! integration tests and the acceptance suite.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use neuroevo::activation::ActivationKind;
use neuroevo::evolution::{
    allocate_offspring, evolve, share_fitness, speciate, EvolutionConfig, Species,
};
use neuroevo::genome::{
    compatibility_distance, crossover, mutate_add_connection, mutate_add_node, mutate_conv,
    mutate_weights, new_minimal_genome, pipeline_output_shape, CompatibilityCoefficients,
    ConvStageGene, Genome, InnovationRegistry, Kernel, NodeKind, Pooler, Shape,
};
use neuroevo::persistence;
use neuroevo::phenotype::{convolve, pool, FeatureMap, ImageMatrix, Phenotype, PoolKind};
use neuroevo::tasks::XorTask;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Reference math
// ---------------------------------------------------------------------------

pub fn reference_activation(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::SigmoidSteepened => 1.0 / (1.0 + (-4.9 * x).exp()),
        ActivationKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        ActivationKind::Relu => {
            if x > 0.0 {
                x
            } else {
                0.0
            }
        }
        ActivationKind::Tanh => {
            let (p, n) = (x.exp(), (-x).exp());
            if p.is_infinite() {
                1.0
            } else if n.is_infinite() {
                -1.0
            } else {
                (p - n) / (p + n)
            }
        }
        ActivationKind::Linear => x,
    }
}

/// Textbook valid cross-correlation over row vectors.
pub fn naive_convolve(image: &[Vec<f64>], kernel: &[Vec<f64>], stride: usize) -> Vec<Vec<f64>> {
    let (h, w) = (image.len(), image[0].len());
    let (kh, kw) = (kernel.len(), kernel[0].len());
    let out_h = (h - kh) / stride + 1;
    let out_w = (w - kw) / stride + 1;
    let mut out = vec![vec![0.0; out_w]; out_h];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut sum = 0.0;
            for (a, krow) in kernel.iter().enumerate() {
                for (b, kv) in krow.iter().enumerate() {
                    sum += image[i * stride + a][j * stride + b] * kv;
                }
            }
            *cell = sum;
        }
    }
    out
}

/// Non-overlapping pooling that drops partial edge windows.
pub fn naive_pool(map: &[Vec<f64>], max: bool, window: usize) -> Vec<Vec<f64>> {
    let out_h = map.len() / window;
    let out_w = map[0].len() / window;
    let mut out = vec![vec![0.0; out_w]; out_h];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut cells = Vec::new();
            for a in 0..window {
                for b in 0..window {
                    cells.push(map[i * window + a][j * window + b]);
                }
            }
            *cell = if max {
                cells.iter().cloned().fold(f64::MIN, f64::max)
            } else {
                cells.iter().sum::<f64>() / cells.len() as f64
            };
        }
    }
    out
}

fn kernel_rows(kernel: &Kernel) -> Vec<Vec<f64>> {
    (0..kernel.rows())
        .map(|r| (0..kernel.cols()).map(|c| kernel.get(r, c)).collect())
        .collect()
}

/// Network output by fixed-point relaxation: every non-source node is
/// recomputed from the previous sweep's values until nothing changes.
/// Needs no topological order; on a DAG it settles after at most
/// `nodes` sweeps.
pub fn reference_forward(genome: &Genome, image: &[Vec<f64>]) -> Vec<f64> {
    let mut map = image.to_vec();
    for stage in genome.conv_stages() {
        map = naive_convolve(&map, &kernel_rows(&stage.kernel), stage.stride);
        match stage.pooler {
            Pooler::Max => map = naive_pool(&map, true, stage.pool_window),
            Pooler::Average => map = naive_pool(&map, false, stage.pool_window),
            Pooler::None => {}
        }
        for row in &mut map {
            for v in row.iter_mut() {
                *v = reference_activation(stage.activation, *v);
            }
        }
    }
    let flat: Vec<f64> = map.into_iter().flatten().collect();

    let mut inputs: Vec<u32> = genome
        .nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::Input)
        .map(|n| n.id)
        .collect();
    inputs.sort();
    assert_eq!(inputs.len(), flat.len(), "pipeline size mismatch");

    let mut values: BTreeMap<u32, f64> = BTreeMap::new();
    for n in genome.nodes() {
        values.insert(n.id, 0.0);
    }
    for (id, v) in inputs.iter().zip(&flat) {
        values.insert(*id, *v);
    }
    for n in genome.nodes().iter().filter(|n| n.kind == NodeKind::Bias) {
        values.insert(n.id, 1.0);
    }

    for _ in 0..=genome.nodes().len() {
        let mut next = values.clone();
        for n in genome.nodes() {
            if matches!(n.kind, NodeKind::Input | NodeKind::Bias) {
                continue;
            }
            let sum: f64 = genome
                .connections()
                .iter()
                .filter(|c| c.enabled && c.to == n.id)
                .map(|c| c.weight * values[&c.from])
                .sum();
            next.insert(n.id, reference_activation(n.activation, sum));
        }
        if next == values {
            break;
        }
        values = next;
    }

    let mut outputs: Vec<u32> = genome
        .nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::Output)
        .map(|n| n.id)
        .collect();
    outputs.sort();
    outputs.iter().map(|id| values[id]).collect()
}

// ---------------------------------------------------------------------------
// Independent invariant check
// ---------------------------------------------------------------------------

/// Every genome invariant, checked without calling into `Genome::validate`.
pub fn invariant_violations(g: &Genome) -> Vec<String> {
    let mut v = Vec::new();
    let nodes = g.nodes();
    if !nodes.windows(2).all(|w| w[0].id < w[1].id) {
        v.push("node ids not strictly increasing".into());
    }
    let count = |kind| nodes.iter().filter(|n| n.kind == kind).count();
    if count(NodeKind::Bias) != 1 {
        v.push(format!("{} bias nodes", count(NodeKind::Bias)));
    }
    if count(NodeKind::Output) == 0 {
        v.push("no outputs".into());
    }
    for (i, s) in g.conv_stages().iter().enumerate() {
        if s.stage_index != i {
            v.push(format!("stage {i} has index {}", s.stage_index));
        }
        for side in [s.kernel.rows(), s.kernel.cols()] {
            if ![1, 3, 5].contains(&side) {
                v.push(format!("stage {i} kernel side {side}"));
            }
        }
        if s.kernel.values().iter().any(|x| !x.is_finite()) {
            v.push(format!("stage {i} non-finite kernel"));
        }
    }
    match pipeline_output_shape(g.conv_stages(), g.input_shape()) {
        Ok(shape) if shape.len() == count(NodeKind::Input) => {}
        Ok(shape) => v.push(format!(
            "pipeline yields {} values for {} inputs",
            shape.len(),
            count(NodeKind::Input)
        )),
        Err(e) => v.push(format!("pipeline invalid: {e}")),
    }

    let conns = g.connections();
    if !conns.windows(2).all(|w| w[0].innovation < w[1].innovation) {
        v.push("innovations not strictly increasing".into());
    }
    let kinds: HashMap<u32, NodeKind> = nodes.iter().map(|n| (n.id, n.kind)).collect();
    let mut pairs = HashSet::new();
    let mut adj: HashMap<u32, Vec<u32>> = HashMap::new();
    for c in conns {
        match (kinds.get(&c.from), kinds.get(&c.to)) {
            (Some(_), Some(NodeKind::Input | NodeKind::Bias)) => {
                v.push(format!("connection {} into a source node", c.innovation))
            }
            (Some(_), Some(_)) => {}
            _ => v.push(format!(
                "connection {} has a dangling endpoint",
                c.innovation
            )),
        }
        if !pairs.insert((c.from, c.to)) {
            v.push(format!("duplicate pair {} -> {}", c.from, c.to));
        }
        if !c.weight.is_finite() || c.weight.abs() > 8.0 {
            v.push(format!("weight {} out of range", c.weight));
        }
        adj.entry(c.from).or_default().push(c.to);
    }

    // Three-color DFS over every gene, enabled or not.
    let mut color: HashMap<u32, u8> = HashMap::new();
    fn visit(n: u32, adj: &HashMap<u32, Vec<u32>>, color: &mut HashMap<u32, u8>) -> bool {
        match color.get(&n) {
            Some(1) => return false,
            Some(2) => return true,
            _ => {}
        }
        color.insert(n, 1);
        for &m in adj.get(&n).into_iter().flatten() {
            if !visit(m, adj, color) {
                return false;
            }
        }
        color.insert(n, 2);
        true
    }
    for n in nodes {
        if !visit(n.id, &adj, &mut color) {
            v.push("cycle".into());
            break;
        }
    }
    v
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

pub fn random_map(rng: &mut TestRng, width: usize, height: usize) -> Vec<Vec<f64>> {
    (0..height)
        .map(|_| (0..width).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}

pub fn random_image(rng: &mut TestRng, shape: Shape) -> Vec<Vec<f64>> {
    (0..shape.height)
        .map(|_| {
            (0..shape.width)
                .map(|_| rng.random_range(0.0..=1.0))
                .collect()
        })
        .collect()
}

pub fn image_matrix(rows: &[Vec<f64>]) -> ImageMatrix {
    let pixels: Vec<f64> = rows.iter().flatten().copied().collect();
    ImageMatrix::new(rows[0].len(), rows.len(), pixels).unwrap()
}

pub fn feature_map(rows: &[Vec<f64>]) -> FeatureMap {
    FeatureMap::from_rows(rows).unwrap()
}

/// A random applicable conv stage for `input`, if any fits.
pub fn random_stage(rng: &mut TestRng, index: usize, input: Shape) -> Option<ConvStageGene> {
    let sides: Vec<usize> = [1, 3, 5]
        .into_iter()
        .filter(|&s| s <= input.width.min(input.height))
        .collect();
    let rows = *sides.choose(rng)?;
    let cols = *sides.choose(rng)?;
    let stride = rng.random_range(1..=2);
    let values = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let mut stage = ConvStageGene {
        stage_index: index,
        kernel: Kernel::new(rows, cols, values).unwrap(),
        stride,
        pooler: Pooler::None,
        pool_window: 1,
        activation: *ActivationKind::ALL.choose(rng).unwrap(),
    };
    let conv = stage.output_shape(input).ok()?;
    let max_window = conv.width.min(conv.height);
    if max_window >= 2 && rng.random_bool(0.5) {
        stage.pooler = if rng.random_bool(0.5) {
            Pooler::Max
        } else {
            Pooler::Average
        };
        stage.pool_window = rng.random_range(2..=max_window.min(3));
    }
    Some(stage)
}

/// Random input shape up to `max_side` and 0 to 2 conv stages that fit it.
pub fn random_layout(rng: &mut TestRng, max_side: usize) -> (Shape, Vec<ConvStageGene>) {
    let shape = Shape::new(
        rng.random_range(1..=max_side),
        rng.random_range(1..=max_side),
    );
    let mut stages = Vec::new();
    let mut current = shape;
    for index in 0..rng.random_range(0..=2) {
        match random_stage(rng, index, current) {
            Some(stage) => {
                current = stage.output_shape(current).unwrap();
                stages.push(stage);
            }
            None => break,
        }
    }
    (shape, stages)
}

/// One random structural or parametric mutation.
pub fn mutate_once(g: &Genome, reg: &mut InnovationRegistry, rng: &mut TestRng) -> Genome {
    match rng.random_range(0..4) {
        0 => mutate_add_connection(g, reg, rng),
        1 => mutate_add_node(g, reg, *ActivationKind::ALL.choose(rng).unwrap(), rng),
        2 => mutate_weights(
            g,
            rng.random(),
            rng.random_range(0.0..3.0),
            rng.random(),
            rng,
        ),
        _ => mutate_conv(
            g,
            rng.random_range(0.0..0.5),
            rng.random(),
            rng.random(),
            rng,
        ),
    }
}

/// A minimal genome for `layout` grown by up to `max_mutations` random mutations.
pub fn grow(
    base: &Genome,
    reg: &mut InnovationRegistry,
    rng: &mut TestRng,
    max_mutations: usize,
) -> Genome {
    let mut g = base.clone();
    for _ in 0..rng.random_range(0..=max_mutations) {
        g = mutate_once(&g, reg, rng);
    }
    g
}

pub fn minimal(
    rng: &mut TestRng,
    reg: &mut InnovationRegistry,
    shape: Shape,
    stages: &[ConvStageGene],
    outputs: usize,
) -> Genome {
    let act = *ActivationKind::ALL.choose(rng).unwrap();
    new_minimal_genome(shape, outputs, stages, act, reg, rng).unwrap()
}

/// Independent random genome with images up to `max_side` on each side.
pub fn random_genome(rng: &mut TestRng, max_side: usize, max_mutations: usize) -> Genome {
    let mut reg = InnovationRegistry::new();
    let (shape, stages) = random_layout(rng, max_side);
    let outputs = rng.random_range(1..=3);
    let base = minimal(rng, &mut reg, shape, &stages, outputs);
    grow(&base, &mut reg, rng, max_mutations)
}

/// `count` genomes grown from one shared minimal ancestor and registry.
pub fn random_family(rng: &mut TestRng, count: usize, max_mutations: usize) -> Vec<Genome> {
    let mut reg = InnovationRegistry::new();
    let (shape, stages) = random_layout(rng, 6);
    let outputs = rng.random_range(1..=2);
    let base = minimal(rng, &mut reg, shape, &stages, outputs);
    (0..count)
        .map(|_| grow(&base, &mut reg, rng, max_mutations))
        .collect()
}

// ---------------------------------------------------------------------------
// Criterion runners
// ---------------------------------------------------------------------------

pub type Outcome = Result<String, String>;

/// Random convolution and pooling cases against the nested-loop oracles.
pub fn conv_pool_oracle(cases: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let (w, h) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let image = random_map(&mut rng, w, h);
        let kr = rng.random_range(1..=3.min(h));
        let kc = rng.random_range(1..=3.min(w));
        let stride = rng.random_range(1..=2);
        let kernel: Vec<Vec<f64>> = (0..kr)
            .map(|_| (0..kc).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let expected = naive_convolve(&image, &kernel, stride);
        let k = Kernel::new(kr, kc, kernel.iter().flatten().copied().collect())
            .map_err(|e| format!("case {case}: {e}"))?;
        let got = convolve(&feature_map(&image), &k, stride)
            .map_err(|e| format!("case {case}: convolve failed: {e}"))?;
        worst = worst.max(compare(&expected, &got).map_err(|e| format!("conv case {case}: {e}"))?);

        let window = rng.random_range(1..=w.min(h).min(3));
        for (max, kind) in [(true, PoolKind::Max), (false, PoolKind::Average)] {
            let expected = naive_pool(&image, max, window);
            let got = pool(&feature_map(&image), kind, window)
                .map_err(|e| format!("case {case}: pool failed: {e}"))?;
            worst =
                worst.max(compare(&expected, &got).map_err(|e| format!("pool case {case}: {e}"))?);
        }
    }
    Ok(format!(
        "{cases} conv and {} pool cases, max abs error {worst:.1e}",
        2 * cases
    ))
}

fn compare(expected: &[Vec<f64>], got: &FeatureMap) -> Result<f64, String> {
    let rows = got.rows();
    if rows.len() != expected.len() || rows.first().map(Vec::len) != expected.first().map(Vec::len)
    {
        return Err(format!(
            "shape {}x{} vs oracle {}x{}",
            got.width(),
            got.height(),
            expected.first().map_or(0, Vec::len),
            expected.len()
        ));
    }
    let mut worst: f64 = 0.0;
    for (a, b) in expected.iter().flatten().zip(rows.iter().flatten()) {
        let d = (a - b).abs();
        if d > TOLERANCE {
            return Err(format!("value {b} vs oracle {a}"));
        }
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Distance symmetry and identity, the crossover innovation law, and a
/// mutation fuzz with an independent invariant check after every step.
pub fn genome_algebra(pairs: usize, fuzz_steps: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let coeffs = CompatibilityCoefficients::default();
    for case in 0..pairs {
        let family = random_family(&mut rng, 2, 12);
        let (a, b) = (&family[0], &family[1]);
        let (ab, ba) = (
            compatibility_distance(a, b, &coeffs),
            compatibility_distance(b, a, &coeffs),
        );
        if ab != ba || ab.is_nan() || ab < 0.0 {
            return Err(format!("case {case}: distance {ab} vs {ba}"));
        }
        for g in [a, b] {
            let d = compatibility_distance(g, &g.clone(), &coeffs);
            if d != 0.0 {
                return Err(format!("case {case}: self distance {d}"));
            }
        }
        let mut a = a.clone();
        let mut b = b.clone();
        a.set_fitness(rng.random_range(0.0..10.0));
        b.set_fitness(rng.random_range(0.0..10.0));
        let (fitter, other) = if a.fitness() >= b.fitness() {
            (&a, &b)
        } else {
            (&b, &a)
        };
        let child = crossover(fitter, other, rng.random(), &mut rng);
        if child.innovations() != fitter.innovations() {
            return Err(format!(
                "case {case}: child innovations differ from fitter's"
            ));
        }
        let violations = invariant_violations(&child);
        if !violations.is_empty() {
            return Err(format!("case {case}: crossover child: {violations:?}"));
        }
    }

    let mut steps = 0;
    while steps < fuzz_steps {
        let mut reg = InnovationRegistry::new();
        let (shape, stages) = random_layout(&mut rng, 8);
        let outputs = rng.random_range(1..=3);
        let mut g = minimal(&mut rng, &mut reg, shape, &stages, outputs);
        for _ in 0..50.min(fuzz_steps - steps) {
            g = mutate_once(&g, &mut reg, &mut rng);
            steps += 1;
            let violations = invariant_violations(&g);
            if !violations.is_empty() {
                return Err(format!("fuzz step {steps}: {violations:?}"));
            }
            if let Err(e) = g.validate() {
                return Err(format!(
                    "fuzz step {steps}: validate rejected a mutant: {e}"
                ));
            }
        }
    }
    Ok(format!(
        "{pairs} distance/crossover pairs, {fuzz_steps} mutation steps, 0 violations"
    ))
}

/// Random evaluated population of `size` genomes sharing one registry.
pub fn random_population(rng: &mut TestRng, size: usize) -> Vec<Genome> {
    let mut family = random_family(rng, size, 8);
    for g in &mut family {
        g.set_fitness(rng.random_range(0.0..10.0));
    }
    family
}

/// Greedy assignment replayed from a precomputed distance table.
fn replay_speciation(
    population: &[Genome],
    previous: &[Species],
    coeffs: &CompatibilityCoefficients,
) -> Vec<Vec<usize>> {
    let mut prev: Vec<&Species> = previous.iter().collect();
    prev.sort_by_key(|s| s.id);
    let to_prev: Vec<Vec<f64>> = prev
        .iter()
        .map(|s| {
            population
                .iter()
                .map(|g| compatibility_distance(&s.representative, g, coeffs))
                .collect()
        })
        .collect();
    let table: Vec<Vec<f64>> = population
        .iter()
        .map(|a| {
            population
                .iter()
                .map(|b| compatibility_distance(a, b, coeffs))
                .collect()
        })
        .collect();

    let mut carried: Vec<Vec<usize>> = vec![Vec::new(); prev.len()];
    let mut founders: Vec<usize> = Vec::new();
    let mut founded: Vec<Vec<usize>> = Vec::new();
    for i in 0..population.len() {
        if let Some(p) = (0..prev.len()).find(|&p| to_prev[p][i] < coeffs.threshold) {
            carried[p].push(i);
        } else if let Some(f) =
            (0..founders.len()).find(|&f| table[founders[f]][i] < coeffs.threshold)
        {
            founded[f].push(i);
        } else {
            founders.push(i);
            founded.push(vec![i]);
        }
    }
    carried.retain(|m| !m.is_empty());
    carried.extend(founded);
    carried
}

/// Partition, distance-table agreement, allocation sum and scaling
/// invariance on random populations.
pub fn speciation_properties(populations: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    for case in 0..populations {
        let size = rng.random_range(1..=24);
        let mut population = random_population(&mut rng, size);
        let coeffs = CompatibilityCoefficients {
            threshold: rng.random_range(0.5..4.0),
            ..CompatibilityCoefficients::default()
        };

        // Seed previous species from a shuffled slice of the population.
        let mut next_id = 1;
        let mut previous = Vec::new();
        if rng.random_bool(0.5) {
            let earlier: Vec<Genome> = (0..rng.random_range(1..=size))
                .map(|_| population.choose(&mut rng).unwrap().clone())
                .collect();
            previous = speciate(&earlier, &[], &coeffs, &mut next_id);
        }

        let species = speciate(&population, &previous, &coeffs, &mut next_id);
        let mut seen = vec![0usize; size];
        for s in &species {
            for &m in &s.members {
                seen[m] += 1;
            }
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(format!("case {case}: not a partition: {seen:?}"));
        }
        let got: Vec<Vec<usize>> = species.iter().map(|s| s.members.clone()).collect();
        let expected = replay_speciation(&population, &previous, &coeffs);
        if got != expected {
            return Err(format!(
                "case {case}: species {got:?}, table replay {expected:?}"
            ));
        }
        for s in &species {
            for &m in &s.members {
                let d = compatibility_distance(&s.representative, &population[m], &coeffs);
                if d >= coeffs.threshold {
                    return Err(format!(
                        "case {case}: member {m} at distance {d} from representative"
                    ));
                }
            }
        }

        let pop_size = rng.random_range(size..=size + 200);
        let stagnation_limit = rng.random_range(1..=5);
        let mut species_a = species.clone();
        for s in &mut species_a {
            s.stagnation = rng.random_range(0..=6);
        }
        let mut species_b = species_a.clone();
        share_fitness(&species_a, &mut population).unwrap();
        let counts = allocate_offspring(&mut species_a, &population, pop_size, stagnation_limit);
        if counts.iter().sum::<usize>() != pop_size {
            return Err(format!(
                "case {case}: allocation {counts:?} does not sum to {pop_size}"
            ));
        }

        let k = rng.random_range(0.01..100.0);
        let mut scaled = population.clone();
        for g in &mut scaled {
            let f = g.fitness().unwrap();
            g.set_fitness(f * k);
        }
        share_fitness(&species_b, &mut scaled).unwrap();
        let scaled_counts = allocate_offspring(&mut species_b, &scaled, pop_size, stagnation_limit);
        if scaled_counts != counts {
            return Err(format!(
                "case {case}: scaling by {k} changed allocation {counts:?} -> {scaled_counts:?}"
            ));
        }
    }
    Ok(format!("{populations} populations"))
}

/// Genome document round trips, history export/import and schema validation.
pub fn serialization(genomes: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    for case in 0..genomes {
        let mut g = random_genome(&mut rng, 8, 20);
        if rng.random_bool(0.5) {
            g.set_fitness(rng.random_range(0.0..100.0));
        }
        let text = persistence::genome_to_string(&g);
        let doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| format!("case {case}: {e}"))?;
        persistence::validate_genome_document(&doc).map_err(|e| format!("case {case}: {e}"))?;
        let back = persistence::genome_from_str(&text).map_err(|e| format!("case {case}: {e}"))?;
        if !back.same_structure(&g) || back.fitness() != g.fitness() {
            return Err(format!("case {case}: round trip changed the genome"));
        }
        if persistence::genome_to_string(&back) != text {
            return Err(format!("case {case}: re-serialization changed the bytes"));
        }
    }

    let config = EvolutionConfig {
        population_size: 30,
        max_generations: 4,
        seed,
        ..EvolutionConfig::default()
    };
    let outcome = evolve(&XorTask::new(), &config).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("history.json");
    persistence::export_history(&outcome.history, &path).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    persistence::validate_history_document(&doc).map_err(|e| e.to_string())?;
    let imported = persistence::import_history(&path).map_err(|e| e.to_string())?;
    if imported != outcome.history {
        return Err("history import differs from the exported archive".into());
    }
    let again = persistence::history_to_string(&imported).map_err(|e| e.to_string())?;
    if again != text {
        return Err("re-exported history differs byte-wise".into());
    }
    Ok(format!(
        "{genomes} genome round trips; {}-generation history round trip; documents schema-valid",
        outcome.history.generations.len()
    ))
}

/// Compiled phenotype against the relaxation interpreter.
pub fn phenotype_oracle(cases: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let g = random_genome(&mut rng, 8, 25);
        let image = random_image(&mut rng, g.input_shape());
        let expected = reference_forward(&g, &image);
        let phenotype = Phenotype::compile(&g).map_err(|e| format!("case {case}: {e}"))?;
        let got = phenotype
            .forward(&image_matrix(&image))
            .map_err(|e| format!("case {case}: {e}"))?;
        if got.len() != expected.len() {
            return Err(format!(
                "case {case}: {} outputs vs {}",
                got.len(),
                expected.len()
            ));
        }
        for (a, b) in expected.iter().zip(&got) {
            let d = (a - b).abs();
            if d.is_nan() || d > TOLERANCE {
                return Err(format!("case {case}: output {b} vs oracle {a}"));
            }
            worst = worst.max(d);
        }
    }
    Ok(format!(
        "{cases} genome/image pairs, max abs error {worst:.1e}"
    ))
}

/// Stable summary of a genome's innovation markers by connection pair.
pub fn marker_table(g: &Genome) -> BTreeSet<(u32, u32, u32)> {
    g.connections()
        .iter()
        .map(|c| (c.innovation, c.from, c.to))
        .collect()
}
