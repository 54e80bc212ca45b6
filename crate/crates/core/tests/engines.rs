mod common;

use common::{bits, configs, instance, rel_err, Dims, Instance};
use pointconv::generate::random_triplets;
use pointconv::oracle::dense_conv_oracle;
use pointconv::prelude::*;
use proptest::prelude::*;

fn small(groups: usize, t: usize, seed: u64) -> Instance {
    instance(&Dims { points: 150, t, groups, c_in_g: 5, c_out_g: 7, neighbors: 12.0 }, seed)
}

fn check_against_oracle(inst: &Instance, cfg: &ExecConfig) {
    let n = inst.n();
    let want = dense_conv_oracle(&inst.weights, &inst.f_in, &inst.triplets, n, Some(&inst.g_out)).unwrap();
    let (f_out, _) = mvmr(&inst.weights, &inst.f_in, &inst.triplets, n, cfg).unwrap();
    assert!(rel_err(f_out.values(), &want.f_out) <= 1e-12, "{cfg:?}");
    let (g_in, _) = mvmr_transposed(&inst.weights, &inst.g_out, &inst.triplets, n, cfg).unwrap();
    assert!(rel_err(g_in.values(), want.grad_in.as_ref().unwrap()) <= 1e-12, "{cfg:?}");
    let (g_w, _) = vvor(&inst.g_out, &inst.f_in, &inst.triplets, inst.weights.kernel_volume(), cfg).unwrap();
    assert!(rel_err(g_w.values(), want.grad_w.as_ref().unwrap()) <= 1e-12, "{cfg:?}");

    let w32 = inst.weights.map(|x| x as f32);
    let f32_in = inst.f_in.map(|x| x as f32);
    let (f_out32, _) = mvmr(&w32, &f32_in, &inst.triplets, n, cfg).unwrap();
    assert!(rel_err(&f_out32.to_f64().into_values(), &want.f_out) <= 1e-5, "{cfg:?}");
}

#[test]
fn executors_agree_with_dense_oracle() {
    let mut seed = 0;
    for groups in [1, 2, 4] {
        for t in [1, 3, 5] {
            seed += 1;
            let inst = small(groups, t, seed);
            for cfg in configs(3) {
                check_against_oracle(&inst, &cfg);
            }
        }
    }
}

#[test]
fn empty_and_single_triplet_lists() {
    let w = make_weights::<f64>(3, 1, 2, 3, 0).unwrap();
    let f = FeatureTensor::<f64>::random(4, 1, 2, 0);
    for cfg in configs(2) {
        let (out, n) = mvmr(&w, &f, &TripletList::empty(4, 4, 27), 4, &cfg).unwrap();
        assert!(out.values().iter().all(|&x| x == 0.0));
        assert_eq!(n, AccessCounters::default());
        let one = TripletList::new(vec![2], vec![1], vec![5], 4, 4, 27).unwrap();
        let (out, _) = mvmr(&w, &f, &one, 4, &cfg).unwrap();
        for m in 0..3 {
            let want: f64 = (0..2).map(|c| w.get(5, 0, c, m) * f.get(1, 0, c)).sum();
            assert!((out.get(2, 0, m) - want).abs() < 1e-15);
        }
    }
}

#[test]
fn out_of_range_triplets_are_rejected() {
    let w = make_weights::<f64>(1, 1, 2, 2, 0).unwrap();
    let f = FeatureTensor::<f64>::random(3, 1, 2, 0);
    let bad = TripletList { i: vec![0], j: vec![3], k: vec![0], sort_axis: SortAxis::None, n_out: 3, n_in: 4, kernel_volume: 1 };
    assert!(mvmr(&w, &f, &bad, 3, &ExecConfig::default()).is_err());
    let bad_k = TripletList { i: vec![0], j: vec![0], k: vec![1], sort_axis: SortAxis::None, n_out: 3, n_in: 3, kernel_volume: 2 };
    assert!(mvmr(&w, &f, &bad_k, 3, &ExecConfig::default()).is_err());
    let f_wrong = FeatureTensor::<f64>::random(3, 1, 5, 0);
    let ok = TripletList::new(vec![0], vec![0], vec![0], 3, 3, 1).unwrap();
    assert!(mvmr(&w, &f_wrong, &ok, 3, &ExecConfig::default()).is_err());
}

#[test]
fn naive_counters_equal_per_triplet_model() {
    let inst = small(2, 3, 40);
    let t = inst.triplets.len() as u64;
    let (g, c, m) = (2u64, 5u64, 7u64);
    let (_, n) = mvmr(&inst.weights, &inst.f_in, &inst.triplets, inst.n(), &ExecConfig::naive()).unwrap();
    assert_eq!(n.total(), g * predict_access_naive(t, c, m));
    assert_eq!((n.w_reads, n.fin_reads, n.fout_atomic_writes), (g * t * c * m, g * t * c, g * t * m));
}

/// Closed-form grouped counters from run counts inside each `L` chunk.
fn expected_grouped(l: &TripletList, groups: u64, c: u64, m: u64, cfg: &ExecConfig) -> AccessCounters {
    let runs = |v: &[u32]| 1 + v.windows(2).filter(|w| w[0] != w[1]).count() as u64;
    let (mut kr, mut jr, mut ir) = (0, 0, 0);
    for lo in (0..l.len()).step_by(cfg.group_len) {
        let hi = (lo + cfg.group_len).min(l.len());
        kr += runs(&l.k[lo..hi]);
        jr += runs(&l.j[lo..hi]);
        ir += runs(&l.i[lo..hi]);
    }
    let m_tiles = m.div_ceil(cfg.block_out as u64);
    let c_tiles = c.div_ceil(cfg.block_in as u64);
    AccessCounters {
        w_reads: groups * kr * c * m,
        fin_reads: groups * jr * c * m_tiles,
        fout_atomic_writes: groups * ir * m * c_tiles,
        gout_reads: 0,
    }
}

#[test]
fn grouped_counters_follow_run_structure() {
    let inst = instance(&Dims { points: 300, t: 3, groups: 2, c_in_g: 20, c_out_g: 9, neighbors: 20.0 }, 41);
    let unique_bound = |l: &TripletList, len: usize| -> u64 {
        (0..l.len())
            .step_by(len)
            .map(|lo| {
                let mut ks = l.k[lo..(lo + len).min(l.len())].to_vec();
                ks.sort_unstable();
                ks.dedup();
                ks.len() as u64
            })
            .sum::<u64>()
            * 2
            * 20
            * 9
    };
    for axis in [SortAxis::None, SortAxis::ByI, SortAxis::ByK] {
        let list = sort_triplets(&inst.triplets, axis);
        for (len, bo, bi) in [(1, 32, 32), (16, 4, 8), (128, 9, 20), (512, 32, 7)] {
            let cfg = ExecConfig::grouped().with_group_len(len).with_blocks(bo, bi).with_workers(2);
            let (_, n) = mvmr(&inst.weights, &inst.f_in, &list, inst.n(), &cfg).unwrap();
            assert_eq!(n, expected_grouped(&list, 2, 20, 9, &cfg), "{axis} {cfg:?}");
            if axis == SortAxis::ByK {
                assert!(n.w_reads <= unique_bound(&list, len));
                assert_eq!(n.w_reads, unique_bound(&list, len));
            }
        }
    }
}

#[test]
fn weight_reads_do_not_grow_with_group_length() {
    let l = sort_triplets(&random_triplets(20_000, 2000, 2000, 27, 3).unwrap(), SortAxis::ByK);
    let w = make_weights::<f32>(3, 1, 8, 8, 1).unwrap();
    let f = FeatureTensor::<f32>::random(2000, 1, 8, 2);
    let mut last = u64::MAX;
    for len in [1, 8, 32, 128, 512] {
        let (_, n) = mvmr(&w, &f, &l, 2000, &ExecConfig::grouped().with_group_len(len)).unwrap();
        assert!(n.w_reads <= last, "L={len}: {} > {last}", n.w_reads);
        last = n.w_reads;
    }
    let (_, naive) = mvmr(&w, &f, &l, 2000, &ExecConfig::naive()).unwrap();
    assert!(last * 100 < naive.w_reads);
}

#[test]
fn vvor_counters_and_bound() {
    let inst = small(1, 3, 42);
    let l = &inst.triplets;
    let (_, n) = vvor(&inst.g_out, &inst.f_in, l, 27, &ExecConfig::naive()).unwrap();
    let t = l.len() as u64;
    assert_eq!((n.gout_reads, n.fin_reads, n.fout_atomic_writes, n.w_reads), (t * 7, t * 5, t * 35, 0));
    for len in [1, 16, 128] {
        let (_, n) = vvor(&inst.g_out, &inst.f_in, l, 27, &ExecConfig::grouped().with_group_len(len)).unwrap();
        let runs: u64 = (0..l.len()).step_by(len).map(|lo| {
            let k = &l.k[lo..(lo + len).min(l.len())];
            1 + k.windows(2).filter(|w| w[0] != w[1]).count() as u64
        }).sum();
        assert_eq!(n.fout_atomic_writes, runs * 35);
    }
}

#[test]
fn vvor_is_bilinear() {
    let inst = small(2, 3, 43);
    let g2 = FeatureTensor::<f64>::random(inst.n(), 2, 7, 99);
    let (a, b) = (0.75, -2.5);
    let mix: Vec<f64> = inst.g_out.values().iter().zip(g2.values()).map(|(x, y)| a * x + b * y).collect();
    let mix = FeatureTensor::new(mix, inst.n(), 2, 7).unwrap();
    for cfg in [ExecConfig::naive(), ExecConfig::grouped().with_group_len(32)] {
        let run = |g: &FeatureTensor<f64>| vvor(g, &inst.f_in, &inst.triplets, 27, &cfg).unwrap().0.values().to_vec();
        let (x, y, z) = (run(&inst.g_out), run(&g2), run(&mix));
        let lin: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        assert!(rel_err(&z, &lin) < 1e-12);
    }
}

#[test]
fn deterministic_mode_ignores_worker_count() {
    let inst = small(2, 3, 44);
    let w32 = inst.weights.map(|x| x as f32);
    let f32_in = inst.f_in.map(|x| x as f32);
    let g32 = inst.g_out.map(|x| x as f32);
    for base in [ExecConfig::naive(), ExecConfig::grouped().with_group_len(16).with_blocks(4, 3)] {
        let mut seen: Option<(Vec<u64>, Vec<u64>, Vec<u64>, Vec<u64>)> = None;
        for workers in [1, 2, 4, 8] {
            let cfg = base.with_deterministic(true).with_workers(workers);
            let a = bits(mvmr(&inst.weights, &inst.f_in, &inst.triplets, inst.n(), &cfg).unwrap().0.values());
            let b = bits(mvmr_transposed(&inst.weights, &inst.g_out, &inst.triplets, inst.n(), &cfg).unwrap().0.values());
            let c = bits(vvor(&inst.g_out, &inst.f_in, &inst.triplets, 27, &cfg).unwrap().0.values());
            let d = bits(vvor(&g32, &f32_in, &inst.triplets, 27, &cfg).unwrap().0.values());
            let _ = mvmr(&w32, &f32_in, &inst.triplets, inst.n(), &cfg).unwrap();
            match &seen {
                None => seen = Some((a, b, c, d)),
                Some(s) => assert_eq!(s, &(a, b, c, d), "workers={workers}"),
            }
        }
    }
}

#[test]
fn sort_axes_and_executors_agree() {
    let inst = small(1, 3, 45);
    let w = inst.weights.map(|x| x as f32);
    let f = inst.f_in.map(|x| x as f32);
    let reference = mvmr(&inst.weights, &inst.f_in, &inst.triplets, inst.n(), &ExecConfig::naive()).unwrap().0;
    for axis in [SortAxis::None, SortAxis::ByI, SortAxis::ByJ, SortAxis::ByK] {
        let l = sort_triplets(&inst.triplets, axis);
        for cfg in [ExecConfig::naive(), ExecConfig::grouped()] {
            let out = mvmr(&w, &f, &l, inst.n(), &cfg).unwrap().0;
            assert!(rel_err(&out.to_f64().into_values(), reference.values()) <= 1e-4);
            let d1 = mvmr(&inst.weights, &inst.f_in, &l, inst.n(), &cfg.with_deterministic(true).with_workers(1)).unwrap().0;
            let d2 = mvmr(&inst.weights, &inst.f_in, &l, inst.n(), &cfg.with_deterministic(true).with_workers(1)).unwrap().0;
            assert_eq!(bits(d1.values()), bits(d2.values()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_triplets_match_oracle(
        count in 0usize..600,
        seed in 0u64..10_000,
        groups in 1usize..4,
        c in 1usize..12,
        m in 1usize..12,
        len in 1usize..200,
        bo in 1usize..16,
        bi in 1usize..16,
        deterministic in any::<bool>(),
    ) {
        let (n_out, n_in, kv) = (37, 23, 27);
        let l = random_triplets(count, n_out, n_in, kv, seed).unwrap();
        let w = make_weights::<f64>(3, groups, c, m, seed).unwrap();
        let f = FeatureTensor::<f64>::random(n_in, groups, c, seed + 1);
        let g = FeatureTensor::<f64>::random(n_out, groups, m, seed + 2);
        let want = dense_conv_oracle(&w, &f, &l, n_out, Some(&g)).unwrap();
        let cfg = ExecConfig::grouped().with_group_len(len).with_blocks(bo, bi).with_deterministic(deterministic).with_workers(3);
        let out = mvmr(&w, &f, &l, n_out, &cfg).unwrap().0;
        prop_assert!(rel_err(out.values(), &want.f_out) <= 1e-12);
        let gi = mvmr_transposed(&w, &g, &l, n_in, &cfg).unwrap().0;
        prop_assert!(rel_err(gi.values(), want.grad_in.as_ref().unwrap()) <= 1e-12);
        let gw = vvor(&g, &f, &l, kv, &cfg).unwrap().0;
        prop_assert!(rel_err(gw.values(), want.grad_w.as_ref().unwrap()) <= 1e-12);
    }
}
