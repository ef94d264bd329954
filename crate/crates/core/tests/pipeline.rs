use infoscribe_core::pyramid::build_pyramid;
use infoscribe_core::registry::RelationKind;
use infoscribe_core::segmenter::{
    expand_level, extract_segments, segment_top, LabelMap, RegionStats,
};
use infoscribe_core::{describe, deserialize, reconstruct, serialize, synth, Raster, SegParams};

/// Blob membership straight from the generator's own rule.
fn blob_truth(w: usize, h: usize) -> Vec<u32> {
    let img = synth::two_blobs(w, h);
    img.pixels()
        .iter()
        .map(|&v| match v {
            30 => 1,
            220 => 2,
            130 => 3,
            _ => unreachable!(),
        })
        .collect()
}

#[test]
fn eight_by_eight_blobs_survive_two_descents() {
    let img = synth::two_blobs(8, 8);
    let p = SegParams {
        top_max_pixels: 4,
        min_seed: 1,
        ..SegParams::default()
    };
    let pyramid = build_pyramid(&img, p.top_max_pixels);
    assert_eq!(pyramid.len(), 3);

    let (mut lm, mut rs) = segment_top(pyramid.top(), &p);
    for level in (0..2).rev() {
        (lm, rs) = expand_level((&lm, &rs), pyramid.level(level).unwrap(), &p).unwrap();
    }
    assert!(synth::same_partition(lm.labels(), &blob_truth(8, 8)));
    assert_eq!(rs.len(), 3);
    let means: Vec<f64> = rs.iter().map(|(_, s)| s.mean_intensity).collect();
    for v in [30.0, 220.0, 130.0] {
        assert!(means.contains(&v), "{means:?}");
    }
}

#[test]
fn blobs_exact_at_larger_sizes() {
    for size in [16, 32, 64, 100] {
        let levels =
            extract_segments(&synth::two_blobs(size, size), &SegParams::default()).unwrap();
        let finest = &levels.last().unwrap().labels;
        assert!(
            synth::same_partition(finest.labels(), &blob_truth(size, size)),
            "size {size}"
        );
    }
}

#[test]
fn infinite_refine_tolerance_is_pure_upscale() {
    let img = synth::smoothed_noise(20, 14, 5, 1);
    let p = SegParams {
        tau_refine: 255,
        ..SegParams::default()
    };
    let coarse_img = infoscribe_core::pyramid::squeeze_once(&img);
    let (clm, crs) = segment_top(&coarse_img, &p);
    let (lm, _) = expand_level((&clm, &crs), &img, &p).unwrap();
    for y in 0..14 {
        for x in 0..20 {
            assert_eq!(lm.get(x, y), clm.get(x / 2, y / 2));
        }
    }
}

#[test]
fn mismatched_reference_is_rejected() {
    let coarse = LabelMap::from_labels(2, 2, vec![1; 4]).unwrap();
    let stats = RegionStats::compute(&coarse, &Raster::filled(2, 2, 9));
    assert!(expand_level(
        (&coarse, &stats),
        &Raster::filled(5, 4, 9),
        &SegParams::default()
    )
    .is_err());
    assert!(expand_level(
        (&coarse, &stats),
        &Raster::filled(3, 3, 9),
        &SegParams::default()
    )
    .is_ok());
}

#[test]
fn square_on_ground_keeps_two_regions_everywhere() {
    let img = synth::square_on_ground(64, 24, 24, 16, 20, 220);
    let levels = extract_segments(&img, &SegParams::default()).unwrap();
    for lvl in &levels {
        assert_eq!(lvl.stats.len(), 2, "level {}", lvl.level);
    }
    let square = levels
        .last()
        .unwrap()
        .stats
        .iter()
        .find(|(_, s)| s.mean_intensity > 100.0)
        .unwrap()
        .1;
    assert!(square.pixel_count.abs_diff(256) <= 8);
}

#[test]
fn unaligned_square_is_recovered_at_full_resolution() {
    // Coarse levels blend the square's edges into extra strips; level 0 must not.
    for (x0, y0) in [(24, 20), (13, 29), (7, 41)] {
        let img = synth::square_on_ground(64, x0, y0, 16, 20, 220);
        let levels = extract_segments(&img, &SegParams::default()).unwrap();
        let finest = &levels.last().unwrap().stats;
        assert_eq!(finest.len(), 2, "square at ({x0}, {y0})");
        let square = finest
            .iter()
            .find(|(_, s)| s.mean_intensity > 100.0)
            .unwrap()
            .1;
        assert!(square.pixel_count.abs_diff(256) <= 8);
    }
}

#[test]
fn single_pixel_image() {
    let d = describe(&Raster::filled(1, 1, 200), &SegParams::default()).unwrap();
    assert_eq!(d.levels().len(), 1);
    assert_eq!(d.finest().regions.len(), 1);
    assert_eq!(reconstruct(&d, 0).unwrap(), Raster::filled(1, 1, 200));
}

#[test]
fn descriptions_relate_the_blobs_to_the_ground() {
    let d = describe(&synth::two_blobs(64, 64), &SegParams::default()).unwrap();
    let d = deserialize(&serialize(&d)).unwrap();
    let finest = d.finest();
    let ground = finest.regions.iter().max_by_key(|r| r.area).unwrap();
    for blob in finest.regions.iter().filter(|r| r.id != ground.id) {
        assert!(ground.has_relation(RelationKind::Contains, blob.id));
        assert!(blob.has_relation(RelationKind::AdjacentTo, ground.id));
        let parent = d.region(blob.parent.unwrap()).unwrap();
        assert!((parent.mean_intensity - blob.mean_intensity).abs() < 40.0);
    }
    let bright = finest
        .regions
        .iter()
        .find(|r| r.mean_intensity > 200.0)
        .unwrap();
    let gray = finest
        .regions
        .iter()
        .find(|r| (100.0..200.0).contains(&r.mean_intensity))
        .unwrap();
    assert!(bright.centroid.0 < gray.centroid.0 && bright.centroid.1 < gray.centroid.1);
}

#[test]
fn every_level_repaints_at_its_own_size() {
    let img = synth::smoothed_noise(90, 61, 17, 2);
    let d = describe(&img, &SegParams::default()).unwrap();
    let pyramid = build_pyramid(&img, SegParams::default().top_max_pixels);
    assert_eq!(d.levels().len(), pyramid.len());
    for lvl in d.levels() {
        let painted = reconstruct(&d, lvl.level).unwrap();
        assert_eq!(painted.dims(), pyramid.level(lvl.level).unwrap().dims());
    }
    let painted = reconstruct(&d, 0).unwrap();
    let mae = img
        .pixels()
        .iter()
        .zip(painted.pixels())
        .map(|(&a, &b)| f64::from(a.abs_diff(b)))
        .sum::<f64>()
        / img.pixel_count() as f64;
    assert!(mae <= 13.0, "MAE {mae}");
}
