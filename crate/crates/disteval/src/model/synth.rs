//! Deterministic synthetic fixture generation for tests and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{AttributeTable, Run, SubjectKind, TruthSet};

/// Sizing knobs for [`synth_fixture`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    /// Number of requests (users).
    pub n_requests: usize,
    /// Item universe size.
    pub catalog_size: usize,
    /// Relevant items held out per request.
    pub n_relevant: usize,
    /// Ranked-list length produced per request.
    pub list_length: usize,
    /// Number of systems to synthesize.
    pub n_systems: usize,
}

/// A complete synthetic evaluation input.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFixture {
    /// One run per system, ordered by system id.
    pub runs: Vec<Run>,
    /// Binary truth with exactly `n_relevant` items per request.
    pub truth: TruthSet,
    /// Single-valued `group` attribute per user.
    pub user_attributes: AttributeTable,
    /// Multi-valued `genre` attribute per item.
    pub item_attributes: AttributeTable,
}

const USER_GROUPS: [&str; 3] = ["g1", "g2", "g3"];
const GENRES: [&str; 8] = [
    "action", "comedy", "documentary", "drama", "horror", "romance", "scifi", "thriller",
];

/// Generates a deterministic synthetic fixture.
///
/// The same seed always yields the same fixture, byte for byte once
/// serialized. Systems are ordered by decreasing quality: system `s` boosts
/// relevant items by `1.5 * 0.5^s`, so earlier systems rank relevant items
/// higher on average.
pub fn synth_fixture(seed: u64, config: SynthConfig) -> Result<SynthFixture> {
    let SynthConfig {
        n_requests,
        catalog_size,
        n_relevant,
        list_length,
        n_systems,
    } = config;
    if n_requests == 0 || catalog_size == 0 || n_relevant == 0 || list_length == 0 || n_systems == 0
    {
        return Err(Error::invalid("all fixture counts must be at least 1"));
    }
    if n_relevant > catalog_size {
        return Err(Error::invalid(format!(
            "n_relevant ({n_relevant}) exceeds catalog size ({catalog_size})"
        )));
    }
    if list_length > catalog_size {
        return Err(Error::invalid(format!(
            "list_length ({list_length}) exceeds catalog size ({catalog_size}); lists are duplicate-free"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<String> = (1..=catalog_size).map(|i| format!("item{i:05}")).collect();
    let users: Vec<String> = (1..=n_requests).map(|u| format!("user{u:05}")).collect();

    let mut user_attributes = AttributeTable::new(SubjectKind::User);
    for user in &users {
        let group = USER_GROUPS[rng.random_range(0..USER_GROUPS.len())];
        user_attributes.set_values(user.clone(), "group", vec![group.to_string()])?;
    }

    let mut item_attributes = AttributeTable::new(SubjectKind::Item);
    for item in &items {
        let k = rng.random_range(1..=3);
        let mut genres: Vec<&str> = GENRES.to_vec();
        genres.shuffle(&mut rng);
        let mut picked: Vec<String> = genres[..k].iter().map(|g| g.to_string()).collect();
        picked.sort_unstable();
        item_attributes.set_values(item.clone(), "genre", picked)?;
    }

    let mut truth = TruthSet::new();
    let mut relevant_per_user: Vec<Vec<usize>> = Vec::with_capacity(n_requests);
    for user in &users {
        let relevant = sample_indices(&mut rng, catalog_size, n_relevant);
        for &idx in &relevant {
            truth.insert(user.clone(), items[idx].clone(), 1.0)?;
        }
        relevant_per_user.push(relevant);
    }

    let mut runs = Vec::with_capacity(n_systems);
    for system in 0..n_systems {
        let system_id = format!("sys{:02}", system + 1);
        let boost = 1.5 * 0.5_f64.powi(system as i32);
        let mut lists = Vec::with_capacity(n_requests);
        for (user, relevant) in users.iter().zip(&relevant_per_user) {
            let mut scored: Vec<(f64, usize)> = (0..catalog_size)
                .map(|idx| (rng.random::<f64>(), idx))
                .collect();
            for &idx in relevant {
                scored[idx].0 += boost;
            }
            // Order by descending score; item index breaks impossible ties.
            scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let list: Vec<String> = scored[..list_length]
                .iter()
                .map(|&(_, idx)| items[idx].clone())
                .collect();
            lists.push((user.clone(), list));
        }
        runs.push(Run::from_lists(system_id, lists)?);
    }

    Ok(SynthFixture {
        runs,
        truth,
        user_attributes,
        item_attributes,
    })
}

/// Samples `k` distinct indices from `0..n` by a partial Fisher-Yates pass.
fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut picked = pool[..k].to_vec();
    picked.sort_unstable();
    picked
}
