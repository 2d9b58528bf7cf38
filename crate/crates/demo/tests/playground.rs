use rpforest_demo::Playground;

#[test]
fn labels_cover_every_point_and_respect_capacity() {
    let p = Playground::generate(400, 4, 1.0, 3).unwrap();
    assert_eq!(p.points().len(), 800);
    for method in 1..=4 {
        let labels = p.labels(method, 20, 5).unwrap();
        assert_eq!(labels.len(), 400);
        let leaves = *labels.iter().max().unwrap() as usize + 1;
        let mut sizes = vec![0usize; leaves];
        labels.iter().for_each(|&l| sizes[l as usize] += 1);
        assert!(sizes.iter().all(|&s| (1..=20).contains(&s)));
    }
    assert!(p.labels(9, 20, 5).is_err());
}

#[test]
fn query_view_is_consistent() {
    let p = Playground::generate(300, 3, 1.0, 1).unwrap();
    let v = p.run_query(17, 2, 5, 6, 4).unwrap();
    assert_eq!(v.truth().len(), 6);
    assert!(v.found().iter().all(|id| v.candidates().contains(id) && *id != 17));
    assert!(v.missed().iter().all(|id| v.truth().contains(id) && !v.found().contains(id)));
    assert!(p.run_query(300, 2, 5, 6, 4).is_err());
}

#[test]
fn missing_curve_falls_with_more_trees() {
    let p = Playground::generate(300, 3, 1.0, 2).unwrap();
    let curve = p.curve(1, 5, &[1, 40], 3, 0).unwrap();
    assert_eq!(curve.len(), 2);
    assert!(curve[1] < curve[0]);
    assert!(p.curve(1, 5, &[1], 0, 0).is_err());
}
