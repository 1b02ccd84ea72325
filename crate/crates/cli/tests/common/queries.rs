//! Random wire queries and their `dgvse retrieve` argument lists.

use dgvse::applications::{BaseRequest, QueryMode, QueryRequest};
use dgvse::Dataset;
use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` valid queries over `ds`: item or tag-set bases, removals drawn from
/// the base tags, additions from the remaining vocabulary, both modes.
pub fn random_queries(ds: &Dataset, n: usize, seed: u64) -> Vec<QueryRequest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (base, base_tags) = if rng.random_bool(0.5) {
                let item = ds.items.choose(&mut rng).unwrap();
                let base = BaseRequest {
                    item: Some(item.id.clone()),
                    tags: None,
                };
                (base, item.tags.clone())
            } else {
                let k = rng.random_range(1..=3);
                let tags = index::sample(&mut rng, ds.num_tags(), k).into_vec();
                let base = BaseRequest {
                    item: None,
                    tags: Some(tags.iter().map(|&t| ds.vocabulary[t].clone()).collect()),
                };
                (base, tags)
            };
            let n_remove = rng.random_range(0..base_tags.len());
            let remove: Vec<usize> = base_tags[..n_remove].to_vec();
            let mut pool: Vec<usize> = (0..ds.num_tags()).filter(|t| !remove.contains(t)).collect();
            let n_add = rng.random_range(0..=2.min(pool.len()));
            let add: Vec<usize> = (0..n_add).map(|_| pool.swap_remove(rng.random_range(0..pool.len()))).collect();
            let names = |ids: &[usize]| ids.iter().map(|&t| ds.vocabulary[t].clone()).collect();
            QueryRequest {
                base,
                remove: names(&remove),
                add: names(&add),
                k: rng.random_range(1..=ds.len()),
                mode: if rng.random_bool(0.5) { QueryMode::Algebra } else { QueryMode::Refuse },
            }
        })
        .collect()
}

/// Arguments after `retrieve --model M --data D`.
pub fn retrieve_args(q: &QueryRequest) -> Vec<String> {
    let base = match (&q.base.item, &q.base.tags) {
        (Some(id), _) => format!("item:{id}"),
        (None, Some(tags)) => format!("tags:{}", tags.join(",")),
        (None, None) => unreachable!(),
    };
    let mut args = vec!["--base".to_string(), base, "-k".into(), q.k.to_string()];
    if !q.remove.is_empty() {
        args.extend(["--remove".to_string(), q.remove.join(",")]);
    }
    if !q.add.is_empty() {
        args.extend(["--add".to_string(), q.add.join(",")]);
    }
    let mode = match q.mode {
        QueryMode::Algebra => "algebra",
        QueryMode::Refuse => "refuse",
    };
    args.extend(["--mode".to_string(), mode.to_string(), "--format".into(), "json".into()]);
    args
}
