import json

import numpy as np
import pytest

import laminar


@pytest.fixture(scope="module")
def moons():
    data = laminar.generate("two_moons", 160, seed=2)
    cfg = laminar.TrainConfig()
    cfg.epochs = 5
    cfg.seed = 3
    model, losses = laminar.train(data["points"], cfg)
    return data, model, losses


def test_generate_shapes():
    data = laminar.generate("concentric_rings", 90, seed=1)
    assert data["points"].shape == (90, 2)
    assert sorted(set(data["labels"])) == [0, 1]
    disk = laminar.generate("transformed_disk", 50, transform="shear")
    assert disk["ground_truth_tensors"].shape == (50, 2, 2)


def test_train_and_push_forward(moons):
    data, model, losses = moons
    assert model.dim == 2
    assert len(losses) == 5
    assert np.all(np.isfinite(losses))
    z, dlogp = laminar.push_forward(data["points"], model)
    assert z.shape == (160, 2)
    assert dlogp.shape == (160,)
    assert np.all(np.isfinite(laminar.log_likelihood(data["points"], model)))


def test_model_round_trip(moons, tmp_path):
    data, model, _ = moons
    path = tmp_path / "m.lamflow"
    model.save(path)
    again = laminar.FlowModel.load(path)
    a, _ = laminar.push_forward(data["points"], model)
    b, _ = laminar.push_forward(data["points"], again)
    assert np.array_equal(a, b)
    assert laminar.FlowModel.from_bytes(model.to_bytes()).parameter_count == model.parameter_count


def test_distances_and_clustering(moons):
    data, model, _ = moons
    d = laminar.distances(data["points"], model)
    assert d.shape == (160, 160)
    assert np.allclose(np.diag(d), 0.0)
    assert np.allclose(d, d.T, rtol=1e-12)
    row = laminar.distances(data["points"], model, sources=[7])
    assert np.array_equal(row[0], d[7])
    medoids, assignment, cost = laminar.k_medoids(d, 2, seed=0)
    assert len(medoids) == 2
    assert cost > 0
    scores = laminar.jaccard(data["labels"], assignment)
    assert all(0.0 <= s["score"] <= 1.0 for s in scores)


def test_tensors_and_ball(moons):
    data, model, _ = moons
    pseudo, tensors = laminar.metric_tensors(data["points"], model)
    assert np.all(np.linalg.norm(pseudo, axis=1) < 1.0)
    assert np.all(np.linalg.eigvalsh(tensors) > 0)
    assert laminar.wasserstein_gaussian(tensors[0], tensors[0]) < 1e-6
    b = laminar.to_ball(np.array([[0.0, 0.0], [3.0, 4.0]]))
    assert np.linalg.norm(b[1]) < 1.0


def test_errors():
    with pytest.raises(ValueError):
        laminar.generate("nonsense", 10)
    with pytest.raises(laminar.LaminarError):
        laminar.FlowModel.load("/nonexistent/model.lamflow")


def test_run_pipeline(tmp_path):
    cfg = {
        "dataset": {"kind": "two_moons", "n_points": 120},
        "flow": {"epochs": 3},
        "cluster_k": 2,
        "seed": 5,
        "output_dir": str(tmp_path / "out"),
    }
    report = laminar.run_pipeline(json.dumps(cfg))
    assert report["n_points"] == 120
    assert (tmp_path / "out" / "distances.bin").exists()
    assert len(report["jaccard"]) == 2
