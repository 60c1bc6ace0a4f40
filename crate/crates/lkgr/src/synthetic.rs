//! Seeded synthetic graph generation for tests, benchmarks, and the
//! gradient-check command.
//!
//! The generator grows a knowledge graph by preferential attachment (new
//! entities connect to existing ones with probability proportional to
//! degree + 1, giving a heavy-tailed degree sequence) and then draws
//! user–item interactions with Pareto-distributed per-user activity and
//! popularity-biased item choice. Everything is a pure function of the
//! spec, including its seed.

use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::graph::{InteractionMatrix, Triple};

/// Shape of a synthetic dataset.
#[derive(Clone, Copy, Debug)]
pub struct SyntheticSpec {
    /// Users 0..n_users.
    pub n_users: u32,
    /// Items are entities 0..n_items.
    pub n_items: u32,
    /// Non-item entities n_items..n_items+n_extra_entities.
    pub n_extra_entities: u32,
    /// Knowledge-graph relations 0..n_relations.
    pub n_relations: u32,
    /// Approximate number of positive interactions to draw.
    pub target_interactions: u32,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Desk-scale benchmark graph: 50 users, 30 items, 40 extra entities,
    /// 3 relations, roughly 400 interactions.
    pub fn desk(seed: u64) -> Self {
        SyntheticSpec {
            n_users: 50,
            n_items: 30,
            n_extra_entities: 40,
            n_relations: 3,
            target_interactions: 400,
            seed,
        }
    }

    /// Minimal graph for gradient checking: 5 users, 5 items, 8 extra
    /// entities, 2 relations.
    pub fn tiny(seed: u64) -> Self {
        SyntheticSpec {
            n_users: 5,
            n_items: 5,
            n_extra_entities: 8,
            n_relations: 2,
            target_interactions: 25,
            seed,
        }
    }
}

/// Generated triples and interactions, ready for graph construction or
/// serialization to TSV.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub triples: Vec<Triple>,
    pub interactions: InteractionMatrix,
}

/// Grow a scale-free unified graph from a [`SyntheticSpec`]. Deterministic
/// per seed.
pub fn scale_free_ukg(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.n_users == 0 || spec.n_items == 0 || spec.n_relations == 0 {
        return Err(Error::InvalidArgument(
            "synthetic spec needs at least one user, one item, and one relation".into(),
        ));
    }
    let n_entities = spec.n_items + spec.n_extra_entities;
    if n_entities < 2 {
        return Err(Error::InvalidArgument(
            "synthetic spec needs at least two entities to form a triple".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // --- Knowledge graph: preferential attachment over all entities. ---
    // Entity e (e >= 1) attaches to up to two distinct earlier entities,
    // picked with probability proportional to degree + 1, so early nodes
    // accumulate degree and the tail follows a power law.
    let mut degree = vec![0u32; n_entities as usize];
    let mut triples = Vec::new();
    for e in 1..n_entities {
        let attach = 2.min(e);
        let mut chosen: Vec<u32> = Vec::with_capacity(attach as usize);
        while (chosen.len() as u32) < attach {
            let weights = (0..e).map(|t| f64::from(degree[t as usize] + 1));
            let dist = WeightedIndex::new(weights).expect("nonempty positive weights");
            let target = dist.sample(&mut rng) as u32;
            if !chosen.contains(&target) {
                chosen.push(target);
            }
        }
        for target in chosen {
            let relation = rng.gen_range(0..spec.n_relations);
            triples.push(Triple { head: e, relation, tail: target });
            degree[e as usize] += 1;
            degree[target as usize] += 1;
        }
    }

    // --- Interactions: Pareto activity, popularity-biased item choice. ---
    // Per-user positive count k ~ Pareto(alpha) scaled so the expected
    // total lands near target_interactions, clamped to [1, n_items].
    let alpha = 2.0;
    let mean = f64::from(spec.target_interactions) / f64::from(spec.n_users);
    let x_min = (mean * (alpha - 1.0) / alpha).max(1.0);
    let mut popularity = vec![1.0f64; spec.n_items as usize];
    let mut pairs = Vec::new();
    for u in 0..spec.n_users {
        let draw: f64 = rng.gen_range(f64::EPSILON..1.0);
        let k = (x_min / draw.powf(1.0 / alpha)).floor() as u32;
        let k = k.clamp(1, spec.n_items);
        let mut picked: Vec<u32> = Vec::with_capacity(k as usize);
        while (picked.len() as u32) < k {
            let dist = WeightedIndex::new(popularity.iter().copied())
                .expect("nonempty positive weights");
            let item = dist.sample(&mut rng) as u32;
            if !picked.contains(&item) {
                picked.push(item);
            }
        }
        for item in picked {
            popularity[item as usize] += 1.0;
            pairs.push((u, item));
        }
    }

    let interactions = InteractionMatrix::from_pairs(pairs)?;
    Ok(SyntheticData {
        spec: *spec,
        triples,
        interactions,
    })
}

impl SyntheticData {
    /// Write `kg.tsv` (head, relation, tail) and `interactions.tsv`
    /// (user, item — implicit positives) into `dir`, returning the paths.
    pub fn write_tsv(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        let kg_path = dir.join("kg.tsv");
        let inter_path = dir.join("interactions.tsv");
        let mut kg = String::new();
        for t in &self.triples {
            kg.push_str(&format!("{}\t{}\t{}\n", t.head, t.relation, t.tail));
        }
        std::fs::write(&kg_path, kg).map_err(|e| Error::io(&kg_path, e))?;
        let mut inter = String::new();
        for &(u, i) in self.interactions.pairs() {
            inter.push_str(&format!("{u}\t{i}\n"));
        }
        std::fs::write(&inter_path, inter).map_err(|e| Error::io(&inter_path, e))?;
        Ok((kg_path, inter_path))
    }
}
