mod common;

use common::*;
use texbias_core::metrics::{dice_per_class, foreground_mean, DiceFlag, MatrixCell};
use texbias_core::volume::LabelMap;

fn line(labels: &[u16], classes: usize) -> LabelMap {
    LabelMap::new([labels.len(), 1, 1], labels.to_vec(), classes).unwrap()
}

#[test]
fn dice_matches_counting_oracle() {
    for seed in 0..25 {
        let classes = 2 + (seed as usize % 9);
        let p = random_labels([8, 8, 8], classes, seed);
        let g = random_labels([8, 8, 8], classes, 1000 + seed);
        assert_eq!(dice_per_class(&p, &g).unwrap().values, dice_oracle(&p, &g));
    }
}

#[test]
fn dice_hand_cases() {
    let p = line(&[1, 1, 1, 1, 0, 0, 0, 0, 0, 0], 3);
    let g = line(&[1, 1, 1, 0, 1, 1, 1, 0, 0, 0], 3);
    let d = dice_per_class(&p, &g).unwrap();
    assert_eq!(d.values[1], 0.6);
    assert_eq!(d.values[2], 1.0);
    assert_eq!(d.flags[2], DiceFlag::BothEmpty);

    let d = dice_per_class(&line(&[2, 2], 3), &line(&[1, 1], 3)).unwrap();
    assert_eq!(d.values, vec![1.0, 0.0, 0.0]);
    assert_eq!(d.flags[1], DiceFlag::OneEmpty);
    assert_eq!(d.flags[2], DiceFlag::OneEmpty);
}

#[test]
fn dice_is_symmetric_and_rejects_mismatches() {
    let p = random_labels([5, 5, 5], 4, 1);
    let g = random_labels([5, 5, 5], 4, 2);
    assert_eq!(dice_per_class(&p, &g).unwrap(), dice_per_class(&g, &p).unwrap());
    assert!(dice_per_class(&p, &random_labels([5, 5, 4], 4, 3)).is_err());
    assert!(dice_per_class(&p, &random_labels([5, 5, 5], 5, 3)).is_err());
}

#[test]
fn cells_average_subjects_without_weighting() {
    let a = dice_per_class(&line(&[0, 1, 1, 1], 3), &line(&[0, 1, 1, 1], 3)).unwrap();
    let b = dice_per_class(&line(&[0, 0, 0, 0, 0, 0, 0, 1], 3), &line(&[0, 0, 0, 0, 0, 0, 1, 1], 3))
        .unwrap();
    let cell = MatrixCell::from_subjects(&[a, b]);
    assert_eq!(cell.subjects, 2);
    assert_eq!(cell.both_empty, vec![0, 0, 2]);
    let b1 = 2.0 / 3.0;
    assert!((cell.dice[1] - (1.0 + b1) / 2.0).abs() < 1e-15);
    assert_eq!(cell.dice[2], 1.0);
    assert!((foreground_mean(&[0.2, 0.4, 0.8]) - 0.6).abs() < 1e-15);
}
