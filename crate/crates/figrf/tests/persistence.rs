use std::path::Path;

use figrf::config::RunConfig;
use figrf::model::{Estimator, SavedModel};
use figrf::pipeline;
use figrf_core::{Classifier, Sequential};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(name: &str) -> RunConfig {
    let mut c = RunConfig::load(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../configs")
            .join(name),
    )
    .unwrap();
    c.sa.max_iterations = 5;
    c
}

fn trained(name: &str) -> (SavedModel, SavedModel) {
    let out = pipeline::run(&config(name), &Sequential).unwrap();
    (out.figrf, out.baseline)
}

/// Raw rows spanning roughly twice each standardized range, with a few
/// missing cells.
fn random_rows(model: &SavedModel, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scaling = model.preprocessing.standardizer.scaling();
    (0..n)
        .map(|_| {
            scaling
                .iter()
                .map(|s| {
                    if rng.random_bool(0.02) {
                        return f64::NAN;
                    }
                    let z: f64 = rng.random_range(-3.0..3.0);
                    s.map_or(z, |s| s.mean + z * s.std)
                })
                .collect()
        })
        .collect()
}

/// Equal up to how the config spells the default feature count.
fn assert_same(a: &SavedModel, b: &SavedModel) {
    assert_eq!(a.estimator.ensemble(), b.estimator.ensemble());
    assert_eq!(a.preprocessing, b.preprocessing);
    assert_eq!(a.label_column, b.label_column);
    match (&a.estimator, &b.estimator) {
        (Estimator::Figrf(x), Estimator::Figrf(y)) => {
            assert_eq!(x.usage_counts(), y.usage_counts());
            assert_eq!(x.config().probabilities, y.config().probabilities);
            assert_eq!(
                x.config().features_per_tree(),
                y.config().features_per_tree()
            );
        }
        (Estimator::Forest(x), Estimator::Forest(y)) => {
            let d = x.ensemble().n_features();
            assert_eq!(
                x.config().features_per_tree(d),
                y.config().features_per_tree(d)
            );
        }
        _ => panic!("sampling changed"),
    }
}

fn assert_round_trip(model: &SavedModel) {
    let json = model.to_json();
    let loaded = SavedModel::from_json(&json).unwrap();
    assert_same(&loaded, model);
    assert_eq!(loaded.to_json(), json);
    for row in random_rows(model, 1000, 99) {
        assert_eq!(loaded.predict_raw(&row), model.predict_raw(&row));
        let mut z = row.clone();
        model.preprocessing.apply_row(&mut z);
        assert_eq!(loaded.estimator.predict(&z), model.estimator.predict(&z));
    }
}

#[test]
fn figrf_and_forest_models_round_trip() {
    for name in ["iris.toml", "wine.toml"] {
        let (figrf, forest) = trained(name);
        assert_round_trip(&figrf);
        assert_round_trip(&forest);
    }
}

#[test]
fn files_round_trip_through_disk() {
    let (figrf, _) = trained("iris.toml");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    figrf.save(&path).unwrap();
    assert_same(&SavedModel::load(&path).unwrap(), &figrf);
    assert!(SavedModel::load(dir.path().join("absent.json")).is_err());
}

#[test]
fn schema_fields_are_present() {
    let (figrf, forest) = trained("iris.toml");
    let v: serde_json::Value = serde_json::from_str(&figrf.to_json()).unwrap();
    assert_eq!(v["sampling"], "weighted");
    assert_eq!(v["probabilities"].as_array().unwrap().len(), 4);
    assert_eq!(v["usage_counts"].as_array().unwrap().len(), 4);
    let node = &v["trees"][0]["nodes"][0];
    assert!(node["kind"] == "split" || node["kind"] == "leaf");
    let v: serde_json::Value = serde_json::from_str(&forest.to_json()).unwrap();
    assert_eq!(v["sampling"], "uniform");
    assert!(v["probabilities"].is_null());
    assert_eq!(v["max_depth"], serde_json::Value::Null);
}

#[test]
fn tampered_files_are_rejected() {
    let (figrf, _) = trained("iris.toml");
    let base: serde_json::Value = serde_json::from_str(&figrf.to_json()).unwrap();
    let reject = |edit: &dyn Fn(&mut serde_json::Value)| {
        let mut v = base.clone();
        edit(&mut v);
        assert!(SavedModel::from_json(&v.to_string()).is_err(), "{edit:p}");
    };
    reject(&|v| v["usage_counts"][0] = (v["usage_counts"][0].as_u64().unwrap() + 1).into());
    reject(&|v| v["sampling"] = "uniform".into());
    reject(&|v| v["n_estimators"] = 3.into());
    reject(&|v| v["format_version"] = 9.into());
    reject(&|v| v["extra"] = 1.into());
    reject(&|v| v["probabilities"][0] = 5.0.into());
    reject(&|v| v["feature_names"][0] = "other".into());
    reject(&|v| {
        let nodes = v["trees"][0]["nodes"].as_array_mut().unwrap();
        if let Some(n) = nodes.iter_mut().find(|n| n["kind"] == "split") {
            n["left"] = 0.into();
        } else {
            nodes[0]["class"] = 7.into();
        }
    });
}
