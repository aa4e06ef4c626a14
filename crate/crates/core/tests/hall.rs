use num_traits::Zero;
use otlab_core::error::HallError;
use otlab_core::hall::*;
use otlab_core::measures::WeightedPointCloud;
use otlab_core::rational::{q, qi, Q};
use otlab_core::Point2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(n: usize, bits: u32) -> SupportGraph {
    let rows: Vec<Vec<u8>> = (0..n).map(|i| (0..n).map(|j| (bits >> (i * n + j) & 1) as u8).collect()).collect();
    SupportGraph::from_matrix(&rows).unwrap()
}

/// |I| ≤ |N(I)| for every row subset, then the same for columns.
fn hall_by_subsets(g: &SupportGraph) -> bool {
    let one_side = |g: &SupportGraph| {
        let adj = g.adjacency();
        (1u32..1 << g.n_sources).all(|s| {
            let mut nb = 0u32;
            for (i, row) in adj.iter().enumerate() {
                if s >> i & 1 == 1 {
                    row.iter().for_each(|&j| nb |= 1 << j);
                }
            }
            s.count_ones() <= nb.count_ones()
        })
    };
    one_side(g) && one_side(&g.transpose())
}

/// Mass of `set` exceeds the mass of its neighbourhood.
fn violates(a: &[Q], b: &[Q], adj: &[Vec<usize>], set: &[usize]) -> bool {
    let mut hit = vec![false; b.len()];
    set.iter().for_each(|&i| adj[i].iter().for_each(|&j| hit[j] = true));
    let lhs: Q = set.iter().map(|&i| &a[i]).sum();
    let rhs: Q = b.iter().zip(&hit).filter(|(_, h)| **h).map(|(m, _)| m).sum();
    lhs > rhs
}

fn feasible_by_subsets(a: &[Q], b: &[Q], adj: &[Vec<usize>]) -> bool {
    (1u32..1 << a.len()).all(|s| {
        let set: Vec<usize> = (0..a.len()).filter(|i| s >> i & 1 == 1).collect();
        !violates(a, b, adj, &set)
    })
}

fn cloud(masses: &[Q]) -> WeightedPointCloud {
    WeightedPointCloud::new(masses.iter().enumerate().map(|(i, m)| (Point2::from_ints(i as i64, 0), m.clone())).collect()).unwrap()
}

fn check_plan(mu: &WeightedPointCloud, nu: &WeightedPointCloud, g: &SupportGraph) {
    let p = construct_plan(mu, nu, g).unwrap();
    let mut rows = vec![Q::zero(); mu.len()];
    let mut cols = vec![Q::zero(); nu.len()];
    for (i, j, m) in &p.entries {
        assert!(g.contains(*i, *j));
        assert!(*m > Q::zero());
        rows[*i] += m;
        cols[*j] += m;
    }
    assert!((0..mu.len()).all(|i| rows[i] == *mu.mass(i)));
    assert!((0..nu.len()).all(|j| cols[j] == *nu.mass(j)));
}

#[test]
fn check_hall_examples() {
    assert!(check_hall(&matrix(3, 0b100_010_001)).unwrap());
    assert!(!check_hall(&SupportGraph::from_matrix(&[vec![1, 1], vec![0, 0]]).unwrap()).unwrap());
    let cyc = SupportGraph::from_matrix(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]).unwrap();
    assert!(check_hall(&cyc).unwrap());
    assert!(hall_by_subsets(&cyc));
    assert!(matches!(check_hall(&SupportGraph::complete(2, 3)), Err(HallError::NotSquare(2, 3))));
}

#[test]
fn every_small_matrix_agrees_with_subsets() {
    for n in 1..=4 {
        for bits in 0u32..1 << (n * n) {
            let g = matrix(n, bits);
            let want = hall_by_subsets(&g);
            assert_eq!(check_hall(&g).unwrap(), want, "{n} {bits:b}");
            match find_permutation(&g) {
                Ok(s) => {
                    assert!(want);
                    let mut seen = vec![false; n];
                    for (i, &j) in s.iter().enumerate() {
                        assert!(g.contains(i, j) && !seen[j]);
                        seen[j] = true;
                    }
                }
                Err(HallError::HallViolation { witness }) => {
                    assert!(!want);
                    let a = vec![qi(1); n];
                    assert!(violates(&a, &a, &g.adjacency(), &witness));
                }
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn permutation_tie_break() {
    assert_eq!(find_permutation(&matrix(3, 0b100_010_001)).unwrap(), vec![0, 1, 2]);
    assert_eq!(find_permutation(&SupportGraph::complete(2, 2)).unwrap(), vec![0, 1]);
    assert_eq!(find_permutation(&SupportGraph::complete(5, 5)).unwrap(), vec![0, 1, 2, 3, 4]);
}

#[test]
fn larger_random_supports() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut seen = [0, 0];
    for _ in 0..300 {
        let n = rng.gen_range(5..=12);
        let p = rng.gen_range(0.1..0.4);
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|_| rng.gen_bool(p)).collect();
        let g = SupportGraph::new(n, n, edges).unwrap();
        let want = hall_by_subsets(&g);
        assert_eq!(check_hall(&g).unwrap(), want);
        if let Ok(s) = find_permutation(&g) {
            assert!(s.iter().enumerate().all(|(i, &j)| g.contains(i, j)));
        }
        seen[want as usize] += 1;
    }
    assert!(seen[0] > 0 && seen[1] > 0, "{seen:?}");
}

#[test]
fn plan_examples() {
    let mu = cloud(&[q(1, 3), q(2, 3)]);
    let nu = cloud(&[q(1, 3), q(2, 3)]);
    let diag = SupportGraph::new(2, 2, [(0, 0), (1, 1)]).unwrap();
    let p = construct_plan(&mu, &nu, &diag).unwrap();
    assert_eq!(p.entries, vec![(0, 0, q(1, 3)), (1, 1, q(2, 3))]);
    check_plan(&mu, &nu, &SupportGraph::complete(2, 2));
    let heavy = cloud(&[q(1, 3), q(1, 1)]);
    assert!(matches!(construct_plan(&mu, &heavy, &diag), Err(HallError::MassMismatch(..))));
    let cross = SupportGraph::new(2, 2, [(0, 1), (1, 1)]).unwrap();
    match construct_plan(&mu, &nu, &cross) {
        Err(HallError::HallViolation { witness }) => {
            let a = [q(1, 3), q(2, 3)];
            assert!(violates(&a, &a, &cross.adjacency(), &witness));
        }
        other => panic!("{other:?}"),
    }
    let fine = cloud(&[Q::new(1.into(), 10_000.into()), Q::new(9_999.into(), 10_000.into())]);
    assert!(matches!(construct_plan(&fine, &fine, &diag), Err(HallError::TooLarge(10_000))));
}

/// `n` positive masses summing to one, each a multiple of `1/total`.
fn partition(rng: &mut ChaCha8Rng, n: usize, total: i64) -> Vec<Q> {
    let mut cuts: Vec<i64> = rand::seq::index::sample(rng, total as usize - 1, n - 1).into_iter().map(|c| c as i64 + 1).collect();
    cuts.sort();
    cuts.insert(0, 0);
    cuts.push(total);
    cuts.windows(2).map(|w| q(w[1] - w[0], total)).collect()
}

#[test]
fn random_plans_against_subset_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut seen = [0, 0];
    for _ in 0..200 {
        let (n, m) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let total = rng.gen_range(6..=60);
        let (a, b) = (partition(&mut rng, n, total), partition(&mut rng, m, total));
        let p = rng.gen_range(0.3..0.9);
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).filter(|_| rng.gen_bool(p)).collect();
        let g = SupportGraph::new(n, m, edges).unwrap();
        let (mu, nu) = (cloud(&a), cloud(&b));
        let adj = g.adjacency();
        let want = feasible_by_subsets(&a, &b, &adj);
        match construct_plan(&mu, &nu, &g) {
            Ok(_) => {
                assert!(want);
                check_plan(&mu, &nu, &g);
            }
            Err(HallError::HallViolation { witness }) => {
                assert!(!want);
                assert!(violates(&a, &b, &adj, &witness));
            }
            Err(e) => panic!("{e}"),
        }
        seen[want as usize] += 1;
    }
    assert!(seen[0] > 0 && seen[1] > 0, "{seen:?}");
}

#[test]
fn support_graph_json() {
    let g = SupportGraph::new(2, 3, [(0, 2), (1, 0), (0, 2)]).unwrap();
    assert_eq!(g.edges.len(), 2);
    let s = serde_json::to_string(&g).unwrap();
    assert_eq!(serde_json::from_str::<SupportGraph>(&s).unwrap(), g);
    assert!(SupportGraph::new(2, 2, [(2, 0)]).is_err());
    assert!(SupportGraph::from_matrix(&[vec![1], vec![1, 0]]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn complete_supports_always_admit_plans(seed in any::<u64>(), n in 1usize..6, m in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = rng.gen_range(6..=60);
        let (a, b) = (partition(&mut rng, n, total), partition(&mut rng, m, total));
        let (mu, nu) = (cloud(&a), cloud(&b));
        check_plan(&mu, &nu, &SupportGraph::complete(n, m));
    }
}
