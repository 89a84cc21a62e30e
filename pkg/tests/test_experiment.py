import math

import numpy as np
import pytest

import core.experiment as experiment
from config.settings import Settings
from core.data import write_mnist_idx
from core.errors import ConfigError, DataFormatError, DatasetNotFoundError
from core.experiment import (
    ExperimentConfig,
    ExperimentRunner,
    builtin_config,
    load_config,
    parse_config,
    run_experiment,
)
from core.initialisers import BENCHMARK_INITIALISERS


def small_config(**overrides):
    document = {
        "name": "tiny",
        "dataset": {"kind": "synthetic", "records": 60, "latent_dim": 4, "features": 10, "seed": 1},
        "epochs": 5,
        "learning_rate": 0.1,
        "runs": 2,
        "base_seed": 3,
        "convergence_epsilon": 0.01,
        "convergence_alpha": 2,
        "hidden": [6, 4, 6],
    }
    document.update(overrides)
    return parse_config(document)


@pytest.fixture
def settings():
    return Settings(workers=1)


def test_runs_every_initialiser_in_canonical_order(settings):
    cfg = small_config()
    logs = run_experiment(cfg, settings)

    assert len(logs) == len(BENCHMARK_INITIALISERS) * cfg.runs
    assert [(log.initialiser, log.run) for log in logs] == [
        (spec.name, run) for spec in BENCHMARK_INITIALISERS for run in range(cfg.runs)
    ]
    for log in logs:
        assert log.seed == cfg.base_seed + log.run
        assert len(log.train_loss) == len(log.test_loss) == cfg.epochs
        assert all(v >= 0 and math.isfinite(v) for v in log.train_loss + log.test_loss)


def test_every_run_sees_the_same_split(settings):
    logs = run_experiment(small_config(runs=3), settings)
    assert len({log.split_checksum for log in logs}) == 1


def test_rerun_reproduces_logs(settings):
    cfg = small_config(batch_size=16)
    first = run_experiment(cfg, settings)
    second = run_experiment(cfg, settings)
    assert [(l.train_loss, l.test_loss) for l in first] == [(l.train_loss, l.test_loss) for l in second]


def test_parallel_runs_match_serial(settings):
    cfg = small_config()
    serial = run_experiment(cfg, settings, workers=1)
    parallel = run_experiment(cfg, settings, workers=4)
    assert [(l.initialiser, l.run, l.train_loss) for l in serial] == [
        (l.initialiser, l.run, l.train_loss) for l in parallel
    ]


def test_deterministic_initialiser_full_batch_runs_are_identical(settings):
    logs = run_experiment(small_config(initialisers=["straddled", "glorotuniform"], runs=3), settings)
    straddled = [log.train_loss for log in logs if log.initialiser == "straddled"]
    glorot = [log.train_loss for log in logs if log.initialiser == "glorotuniform"]
    assert straddled[0] == straddled[1] == straddled[2]
    assert glorot[0] != glorot[1]


def test_single_epoch_run_has_one_loss_entry(settings):
    cfg = small_config(initialisers=["straddled"], runs=1)
    runner = ExperimentRunner(settings)
    data = runner.prepare_data(cfg)
    log = runner.train_run(cfg.model_copy(update={"epochs": 1}), cfg.initialisers[0], 0, data)
    assert len(log.train_loss) == len(log.test_loss) == 1


def test_divergence_is_recorded_with_sentinel(settings, monkeypatch):
    calls = {"count": 0}

    def failing_evaluate(model, x):
        calls["count"] += 1
        return 0.5 if calls["count"] <= 2 else float("nan")

    monkeypatch.setattr(experiment, "evaluate", failing_evaluate)
    logs = run_experiment(small_config(initialisers=["straddled"], runs=1), settings)

    assert logs[0].train_loss == [0.5] + [math.inf] * 4
    assert logs[0].test_loss == [0.5] + [math.inf] * 4
    assert logs[0].diverged


def test_builtin_configs_match_published_settings():
    settings = Settings(mnist_images_path="train-images", swarm_csv_path="swarm.csv")

    synthetic = builtin_config("synthetic", settings)
    assert (synthetic.epochs, synthetic.batch_size, synthetic.learning_rate, synthetic.runs) == (1000, "full", 0.1, 10)
    assert (synthetic.convergence_epsilon, synthetic.convergence_alpha) == (0.001, 100)
    assert (synthetic.dataset.records, synthetic.dataset.features, synthetic.dataset.latent_dim) == (5000, 100, 20)
    assert synthetic.split_fraction == 0.8
    assert [spec.name for spec in synthetic.initialisers] == [spec.name for spec in BENCHMARK_INITIALISERS]

    mnist = builtin_config("mnist", settings)
    assert (mnist.batch_size, mnist.epochs, mnist.convergence_epsilon, mnist.convergence_alpha) == (256, 1000, 0.005, 250)
    assert mnist.batch_rows == 256
    assert mnist.dataset.images_path == "train-images"

    swarm = builtin_config("swarm", settings)
    assert (swarm.epochs, swarm.batch_size, swarm.convergence_epsilon, swarm.convergence_alpha) == (1500, "full", 0.005, 500)
    assert swarm.dataset.drop_columns == ["Swarm_Behaviour"]

    with pytest.raises(ConfigError):
        builtin_config("cifar", settings)


def test_config_validation_lists_problems():
    with pytest.raises(ConfigError) as excinfo:
        small_config(epochs=0, runs=0)
    assert "epochs" in str(excinfo.value) and "runs" in str(excinfo.value)

    with pytest.raises(ConfigError, match="convergence_alpha"):
        small_config(epochs=5, convergence_alpha=5)
    with pytest.raises(ConfigError):
        small_config(initialisers=["straddled", "straddled"])
    with pytest.raises(ConfigError):
        small_config(batch_size=0)
    with pytest.raises(ConfigError):
        small_config(unknown_field=1)


def test_load_config_accepts_comments(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(
        """{
          // desk-scale run
          "dataset": {"kind": "synthetic", "records": 50},
          "epochs": 10, "convergence_epsilon": 0.005, "convergence_alpha": 3,
          "initialisers": ["Straddled", {"kind": "random", "random_stddev": 1.0}],
        }"""
    )
    cfg = load_config(path)
    assert isinstance(cfg, ExperimentConfig)
    assert [spec.name for spec in cfg.initialisers] == ["straddled", "random"]
    assert cfg.initialisers[1].random_stddev == 1.0
    assert cfg.batch_rows is None


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{ not json")
    with pytest.raises(ConfigError):
        load_config(broken)


def test_missing_dataset_path_is_named(settings, tmp_path):
    cfg = small_config(dataset={"kind": "csv", "path": str(tmp_path / "swarm.csv")})
    with pytest.raises(DatasetNotFoundError, match="swarm.csv"):
        ExperimentRunner(settings).prepare_data(cfg)


def test_worker_resolution(monkeypatch):
    cfg = small_config(workers=3)
    monkeypatch.delenv("STRADDLE_WORKERS", raising=False)
    assert ExperimentRunner(Settings()).resolve_workers(cfg) == 3
    assert ExperimentRunner(Settings()).resolve_workers(cfg, workers=2) == 2

    monkeypatch.setenv("STRADDLE_WORKERS", "5")
    assert ExperimentRunner(Settings()).resolve_workers(cfg) == 5
    assert ExperimentRunner(Settings()).resolve_workers(small_config()) == 5

    with pytest.raises(ValueError):
        ExperimentRunner(Settings()).resolve_workers(cfg, workers=0)


def test_mnist_original_split_keeps_files_apart(settings, tmp_path):
    train_path, test_path = tmp_path / "train-images", tmp_path / "test-images"
    write_mnist_idx(test_path, np.full((3, 28, 28), 200, dtype=np.uint8))
    train_images = np.zeros((6, 28, 28), dtype=np.uint8)
    train_images[0] = 255
    write_mnist_idx(train_path, train_images)

    cfg = small_config(dataset={
        "kind": "mnist",
        "images_path": str(train_path),
        "test_images_path": str(test_path),
        "use_original_split": True,
    })
    data = ExperimentRunner(settings).prepare_data(cfg)

    assert data.split.train.shape == (6, 784)
    assert data.split.test.shape == (3, 784)
    np.testing.assert_array_equal(data.split.train[0], np.ones(784))
    np.testing.assert_array_equal(data.split.train[1:], 0.0)
    np.testing.assert_allclose(data.split.test, 200 / 255)


def test_mnist_pooled_split_uses_both_files(settings, tmp_path):
    train_path, test_path = tmp_path / "train-images", tmp_path / "test-images"
    write_mnist_idx(train_path, np.zeros((8, 28, 28), dtype=np.uint8))
    write_mnist_idx(test_path, np.ones((2, 28, 28), dtype=np.uint8))

    cfg = small_config(dataset={"kind": "mnist", "images_path": str(train_path), "test_images_path": str(test_path)})
    data = ExperimentRunner(settings).prepare_data(cfg)
    assert (data.split.train.shape[0], data.split.test.shape[0]) == (8, 2)


def test_original_split_requires_test_file(settings, tmp_path):
    train_path = tmp_path / "train-images"
    write_mnist_idx(train_path, np.zeros((4, 28, 28), dtype=np.uint8))
    cfg = small_config(dataset={"kind": "mnist", "images_path": str(train_path), "use_original_split": True})
    with pytest.raises(DataFormatError, match="test_images_path"):
        ExperimentRunner(settings).prepare_data(cfg)


def test_swarm_preset_reads_csv_from_settings(tmp_path):
    path = tmp_path / "swarm.csv"
    rows = "\n".join(f"{i},{i * 2 + 1},{i % 2}" for i in range(10))
    path.write_text("x1,x2,Swarm_Behaviour\n" + rows + "\n")

    settings = Settings(swarm_csv_path=str(path), workers=1)
    cfg = builtin_config("swarm", settings)
    data = ExperimentRunner(settings).prepare_data(cfg)

    assert data.input_dim == 2
    assert (data.split.train.shape[0], data.split.test.shape[0]) == (8, 2)
    pooled = np.vstack([data.split.train, data.split.test])
    assert pooled.min() == 0.0 and pooled.max() == 1.0
    np.testing.assert_allclose(pooled[:, 0], pooled[:, 1])
