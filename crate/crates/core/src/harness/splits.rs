//! Train/validation/test split generation. Two policies: fractional
//! (shuffle, take ceil(p*n) for train and val, rest test) and per-class
//! (fixed training nodes per class, then a validation and test pool).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum SplitPolicy {
    Fractional { p_train: f64, p_val: f64 },
    PerClass { n_per_class: usize, n_val: usize, n_test: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub policy: SplitPolicy,
}

pub fn make_splits(
    n: usize,
    labels: &[usize],
    policy: SplitPolicy,
    seed: u64,
) -> Result<SplitMasks> {
    if labels.len() != n {
        return Err(Error::input(format!("{} labels for {n} nodes", labels.len())));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut rng);

    let (train, val, test) = match policy {
        SplitPolicy::Fractional { p_train, p_val } => {
            if !(0.0..=1.0).contains(&p_train)
                || !(0.0..=1.0).contains(&p_val)
                || p_train + p_val > 1.0
            {
                return Err(Error::parameter("split fractions must be in [0,1] and sum <= 1"));
            }
            // Ceiling keeps the train set nonempty on tiny graphs.
            let n_train = (p_train * n as f64).ceil() as usize;
            let n_val = (p_val * n as f64).ceil() as usize;
            if n_train + n_val > n {
                return Err(Error::parameter("split fractions leave no test nodes"));
            }
            let train = nodes[..n_train].to_vec();
            let val = nodes[n_train..n_train + n_val].to_vec();
            let test = nodes[n_train + n_val..].to_vec();
            (train, val, test)
        }
        SplitPolicy::PerClass { n_per_class, n_val, n_test } => {
            let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
            let mut train = Vec::new();
            let mut pool = Vec::new();
            for c in 0..n_classes {
                let members: Vec<usize> = nodes
                    .iter()
                    .copied()
                    .filter(|&i| labels[i] == c)
                    .collect();
                if members.len() < n_per_class {
                    return Err(Error::parameter(format!(
                        "class {c} has {} nodes, fewer than n_per_class = {n_per_class}",
                        members.len()
                    )));
                }
                train.extend_from_slice(&members[..n_per_class]);
                pool.extend_from_slice(&members[n_per_class..]);
            }
            // Pool keeps the shuffled node order rather than class order.
            let in_pool: std::collections::HashSet<usize> = pool.iter().copied().collect();
            let pool: Vec<usize> = nodes.iter().copied().filter(|i| in_pool.contains(i)).collect();
            if pool.len() < n_val + n_test {
                return Err(Error::parameter(format!(
                    "pool of {} nodes cannot supply {n_val} val + {n_test} test",
                    pool.len()
                )));
            }
            let val = pool[..n_val].to_vec();
            let test = pool[n_val..n_val + n_test].to_vec();
            (train, val, test)
        }
    };

    Ok(SplitMasks {
        train,
        val,
        test,
        seed,
        policy,
    })
}
