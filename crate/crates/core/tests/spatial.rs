mod common;

use std::collections::HashSet;

use pointconv::oracle::brute_radius_oracle;
use pointconv::prelude::*;
use pointconv::spatial::voxel_key;
use proptest::prelude::*;

fn cloud_strategy(max: usize) -> impl Strategy<Value = PointCloud> {
    (prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), 1..max), 1usize..4).prop_map(|(pts, batches)| {
        let n = pts.len();
        let mut offsets: Vec<usize> = (0..=batches).map(|b| b * n / batches).collect();
        offsets.dedup();
        if offsets.len() == 1 {
            offsets.push(n);
        }
        PointCloud::new(pts, offsets).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn radius_search_matches_brute_force(cloud in cloud_strategy(200), r in 0.05f64..1.5) {
        let got = radius_search(&cloud, &cloud, r).unwrap();
        let want = brute_radius_oracle(&cloud, &cloud, r);
        prop_assert_eq!(&got.out_index, &want.out_index);
        prop_assert_eq!(&got.in_index, &want.in_index);
    }

    #[test]
    fn radius_search_between_clouds(a in cloud_strategy(120), seed in 0u64..1000, r in 0.1f64..1.0) {
        let b = common::uniform(a.len().max(3), seed);
        let b = PointCloud::from_positions(b.positions().iter().map(|p| p.map(|x| 4.0 * x - 2.0)).collect()).unwrap();
        let a = PointCloud::from_positions(a.positions().to_vec()).unwrap();
        let got = radius_search(&a, &b, r).unwrap();
        let want = brute_radius_oracle(&a, &b, r);
        prop_assert_eq!(got.out_index, want.out_index);
        prop_assert_eq!(got.in_index, want.in_index);
    }

    #[test]
    fn downsample_keeps_a_bit_exact_subset(cloud in cloud_strategy(300), v in 0.05f64..1.0) {
        let (coarse, map) = voxel_downsample(&cloud, v).unwrap();
        prop_assert_eq!(coarse.len(), map.kept_index.len());
        prop_assert_eq!(coarse.num_batches(), cloud.num_batches());
        let mut cells = HashSet::new();
        for (m, &p) in map.kept_index.iter().enumerate() {
            prop_assert_eq!(coarse.positions()[m].map(f64::to_bits), cloud.positions()[p].map(f64::to_bits));
            prop_assert_eq!(map.parent_of[p], m);
            prop_assert!(cells.insert((cloud.batch_ids()[p], voxel_key(&cloud.positions()[p], v))));
        }
        let ids = cloud.batch_ids();
        for (p, &m) in map.parent_of.iter().enumerate() {
            let rep = map.kept_index[m];
            prop_assert_eq!(ids[p], ids[rep]);
            prop_assert_eq!(voxel_key(&cloud.positions()[p], v), voxel_key(&cloud.positions()[rep], v));
        }
        // one representative per occupied (batch, voxel)
        let occupied: HashSet<_> = (0..cloud.len()).map(|p| (ids[p], voxel_key(&cloud.positions()[p], v))).collect();
        prop_assert_eq!(occupied.len(), coarse.len());
    }

    #[test]
    fn downsample_is_idempotent(cloud in cloud_strategy(300), v in 0.05f64..1.0) {
        let (once, _) = voxel_downsample(&cloud, v).unwrap();
        let (twice, map) = voxel_downsample(&once, v).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(map.kept_index, (0..once.len()).collect::<Vec<_>>());
    }

    #[test]
    fn upsample_gathers_parent_rows(cloud in cloud_strategy(200), v in 0.1f64..1.0, seed in 0u64..100) {
        let (coarse, map) = voxel_downsample(&cloud, v).unwrap();
        let f = FeatureTensor::<f64>::random(coarse.len(), 2, 3, seed);
        let up = upsample(&cloud, &map, &f).unwrap();
        prop_assert_eq!(up.rows(), cloud.len());
        for p in 0..cloud.len() {
            prop_assert_eq!(up.row(p), f.row(map.parent_of[p]));
        }
    }
}

#[test]
fn downsample_representative_is_nearest_to_centroid() {
    // cell [0,1)³ holds three points; the centroid is (0.4, 0, 0)
    let cloud = PointCloud::from_positions(vec![[0.0, 0.0, 0.0], [0.35, 0.0, 0.0], [0.85, 0.0, 0.0], [1.5, 0.0, 0.0]]).unwrap();
    let (coarse, map) = voxel_downsample(&cloud, 1.0).unwrap();
    assert_eq!(map.kept_index, vec![1, 3]);
    assert_eq!(map.parent_of, vec![0, 0, 0, 1]);
    assert_eq!(coarse.positions(), &[[0.35, 0.0, 0.0], [1.5, 0.0, 0.0]]);
}

#[test]
fn radius_is_inclusive_and_batches_are_isolated() {
    let cloud = PointCloud::new(vec![[0.0; 3], [0.5, 0.0, 0.0], [0.0; 3], [0.25, 0.0, 0.0]], vec![0, 2, 4]).unwrap();
    let n = radius_search(&cloud, &cloud, 0.5).unwrap();
    assert_eq!(n.neighbors(0), &[0, 1]);
    assert_eq!(n.neighbors(2), &[2, 3]);
    assert_eq!(n.neighbors(3), &[2, 3]);
    assert!(radius_search(&cloud, &cloud, 0.0).is_err());
    assert!(voxel_downsample(&cloud, -1.0).is_err());
}

#[test]
fn upsample_rejects_mismatched_shapes() {
    let cloud = common::uniform(50, 3);
    let (coarse, map) = voxel_downsample(&cloud, 0.5).unwrap();
    let wrong = FeatureTensor::<f32>::zeros(coarse.len() + 1, 1, 1);
    assert!(upsample(&cloud, &map, &wrong).is_err());
    assert!(upsample(&coarse, &map, &FeatureTensor::<f32>::zeros(coarse.len(), 1, 1)).is_err() || coarse.len() == cloud.len());
}
