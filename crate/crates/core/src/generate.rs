//! Seeded random feature models for property testing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    build_model_with_root, ConstraintKind, CrossTreeConstraint, FeatureId, FeatureModel, Relation,
    RelationType,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub max_features: usize,
    /// Depth of the deepest leaf; the root is at depth 0.
    pub max_depth: usize,
    pub max_fanout: usize,
    /// Upper bound on constraints per feature.
    pub constraint_density: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            max_features: 14,
            max_depth: 4,
            max_fanout: 4,
            constraint_density: 0.3,
        }
    }
}

fn name(i: usize) -> FeatureId {
    FeatureId::new(if i == 0 {
        "r".to_string()
    } else {
        format!("f{i}")
    })
    .expect("valid name")
}

/// Builds a well-formed model from `seed`. The same seed and config always
/// yield the same model.
pub fn generate_model(seed: u64, cfg: &GeneratorConfig) -> FeatureModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.gen_range(1..=cfg.max_features.max(1));

    let mut relations: Vec<Relation> = Vec::new();
    let mut depth = vec![0usize];
    let mut frontier = vec![0usize];
    while depth.len() < target && !frontier.is_empty() {
        let parent = frontier.remove(rng.gen_range(0..frontier.len()));
        if depth[parent] >= cfg.max_depth {
            continue;
        }
        let room = target - depth.len();
        let fanout = rng.gen_range(1..=cfg.max_fanout.min(room));
        let children: Vec<usize> = (depth.len()..depth.len() + fanout).collect();
        for _ in &children {
            depth.push(depth[parent] + 1);
        }
        frontier.extend(&children);

        // Split the children into one optional group and single-child
        // relations.
        let grouped = if fanout >= 2 && rng.gen_bool(0.6) {
            rng.gen_range(2..=fanout)
        } else {
            0
        };
        if grouped > 0 {
            let rtype = *[
                RelationType::Alternative,
                RelationType::OptionalAlternative,
                RelationType::Or,
                RelationType::OptionalOr,
            ]
            .choose(&mut rng)
            .expect("non-empty");
            relations.push(Relation::new(
                relations.len(),
                name(parent),
                children[..grouped].iter().map(|c| name(*c)).collect(),
                rtype,
            ));
        }
        for c in &children[grouped..] {
            let rtype = if rng.gen_bool(0.5) {
                RelationType::Mandatory
            } else {
                RelationType::Optional
            };
            relations.push(Relation::new(
                relations.len(),
                name(parent),
                vec![name(*c)],
                rtype,
            ));
        }
    }

    let n = depth.len();
    let parents: Vec<Option<usize>> = {
        let mut p = vec![None; n];
        for r in &relations {
            let pi = index(&r.parent);
            for c in &r.children {
                p[index(c)] = Some(pi);
            }
        }
        p
    };
    let is_ancestor = |a: usize, mut b: usize| {
        while let Some(p) = parents[b] {
            if p == a {
                return true;
            }
            b = p;
        }
        false
    };
    let unrelated = |a: usize, b: usize| a != b && !is_ancestor(a, b) && !is_ancestor(b, a);

    let budget = (cfg.constraint_density * n as f64).floor() as usize;
    let wanted = if budget == 0 {
        0
    } else {
        rng.gen_range(0..=budget)
    };
    let mut pairs: Vec<(ConstraintKind, usize, usize)> = Vec::new();

    // Half the time, plant a group parent requiring a feature with a
    // mandatory child.
    if wanted > 0 && rng.gen_bool(0.5) {
        let group_parents: Vec<usize> = relations
            .iter()
            .filter(|r| r.rtype.is_group())
            .map(|r| index(&r.parent))
            .collect();
        let with_mandatory: Vec<usize> = relations
            .iter()
            .filter(|r| r.rtype == RelationType::Mandatory)
            .map(|r| index(&r.parent))
            .collect();
        let mut candidates: Vec<(usize, usize)> = group_parents
            .iter()
            .flat_map(|a| with_mandatory.iter().map(move |b| (*a, *b)))
            .filter(|(a, b)| unrelated(*a, *b))
            .collect();
        candidates.dedup();
        if let Some((a, b)) = candidates.choose(&mut rng) {
            pairs.push((ConstraintKind::Requires, *a, *b));
        }
    }
    let mut attempts = 0;
    while pairs.len() < wanted && attempts < 50 {
        attempts += 1;
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if !unrelated(a, b) || pairs.iter().any(|(_, x, y)| (*x, *y) == (a, b)) {
            continue;
        }
        let kind = if rng.gen_bool(0.5) {
            ConstraintKind::Requires
        } else {
            ConstraintKind::Excludes
        };
        pairs.push((kind, a, b));
    }
    let constraints = pairs
        .into_iter()
        .enumerate()
        .map(|(i, (kind, a, b))| CrossTreeConstraint::new(i, kind, name(a), name(b)))
        .collect();

    build_model_with_root(&format!("Gen{seed}"), Some(name(0)), relations, constraints)
        .expect("generated model is well formed")
}

fn index(f: &FeatureId) -> usize {
    match f.as_str() {
        "r" => 0,
        s => s[1..].parse().expect("generated name"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let cfg = GeneratorConfig::default();
        for seed in 0..20 {
            assert_eq!(generate_model(seed, &cfg), generate_model(seed, &cfg));
        }
        assert_ne!(generate_model(1, &cfg), generate_model(2, &cfg));
    }

    #[test]
    fn respects_bounds() {
        let cfg = GeneratorConfig::default();
        let mut planted = 0;
        for seed in 0..500 {
            let m = generate_model(seed, &cfg);
            assert!(m.len() <= 14);
            assert!(m.constraints().len() as f64 <= 0.3 * m.len() as f64);
            for f in m.features() {
                let mut d = 0;
                let mut cur = f.clone();
                while let Some(p) = m.parent(cur.as_str()) {
                    d += 1;
                    cur = p.clone();
                }
                assert!(d <= 4);
            }
            for r in m.relations() {
                let fan: usize = m
                    .relations()
                    .iter()
                    .filter(|x| x.parent == r.parent)
                    .map(|x| x.children.len())
                    .sum();
                assert!(fan <= 4);
            }
            planted += m.constraints().iter().any(|c| {
                c.kind == ConstraintKind::Requires
                    && m.relations()
                        .iter()
                        .any(|r| r.parent == c.source && r.rtype.is_group())
                    && m.relations()
                        .iter()
                        .any(|r| r.parent == c.target && r.rtype == RelationType::Mandatory)
            }) as usize;
        }
        assert!(planted > 20, "{planted}");
    }
}
