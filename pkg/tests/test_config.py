import pytest

from daema.config import load_experiment, load_registry, lookup, output_dir, parse_experiment
from daema.errors import ConfigError
from daema.pipeline import DropNA, DropOutliers


def test_builtin_registry():
    reg = load_registry(data_dir="data")
    assert set(reg) == {"breast", "glass", "boston", "ionosphere", "shuttle", "eeg", "casp"}
    assert reg["boston"].task == "regression" and reg["boston"].label == "MEDV"
    assert isinstance(reg["breast"].rules[0], DropNA)
    assert isinstance(reg["eeg"].rules[0], DropOutliers)


def test_builtin_registry_loads_glass():
    ds = lookup(load_registry(data_dir="data"), "glass").load()
    assert ds.features.shape == (214, 9)


def test_unknown_dataset_lists_registered():
    with pytest.raises(ConfigError, match="breast"):
        lookup(load_registry(), "nope")


def test_missing_file(tmp_path):
    reg = load_registry(data_dir=tmp_path)
    with pytest.raises(ConfigError, match="does not exist"):
        reg["glass"].load()


def test_custom_registry(tmp_path):
    (tmp_path / "toy.csv").write_text("a,b,y\n1,2,0\n3,NA,1\n5,6,0\n")
    (tmp_path / "reg.ini").write_text("[toy]\npath = toy.csv\nlabel = y\ntask = classification\nclean = drop_na\n")
    reg = load_registry(tmp_path / "reg.ini")
    ds = reg["toy"].load()
    assert ds.features.shape == (2, 2)


def test_registry_unknown_key(tmp_path):
    (tmp_path / "reg.ini").write_text("[toy]\npath = toy.csv\ncolour = red\n")
    with pytest.raises(ConfigError, match="colour"):
        load_registry(tmp_path / "reg.ini")


def test_parse_full_experiment():
    cfg = parse_experiment("""
[experiment]
dataset = breast   # comment
missingness = mnar
rate = 0.3
models = daema, mean
seeds = 4
downstream = yes
[train]
steps = 100
checkpoints = 90, 100
[forest]
n_estimators = 7
max_features = 3
repeats = 2
""")
    assert cfg.dataset == "breast" and cfg.missingness == "mnar" and cfg.rate == 0.3
    assert cfg.models == ("daema", "mean") and cfg.seeds == 4 and cfg.downstream
    assert cfg.train.steps == 100 and cfg.train.checkpoint_steps == (90, 100)
    assert cfg.forest.n_estimators == 7 and cfg.forest.max_features == 3 and cfg.forest_repeats == 2


def test_defaults():
    cfg = parse_experiment("[experiment]\ndataset = glass\n")
    assert cfg.train.steps == 40000 and cfg.rate == 0.2 and cfg.seeds == 10
    assert cfg.forest.n_estimators == 100 and cfg.forest.max_leaf_nodes == 1000


def test_all_schema_errors_listed():
    with pytest.raises(ConfigError) as err:
        parse_experiment("[experiment]\nrate = lots\nseeds = x\ncolour = red\n[extra]\nk = v\n")
    msg = str(err.value)
    for fragment in ("rate", "seeds", "colour", "[extra]", "dataset is required"):
        assert fragment in msg


def test_value_errors_from_dataclasses():
    with pytest.raises(ConfigError, match="missingness"):
        parse_experiment("[experiment]\ndataset = glass\nmissingness = mar\n")


def test_load_experiment_missing(tmp_path):
    with pytest.raises(ConfigError):
        load_experiment(tmp_path / "nope.ini")


def test_output_dir_env(monkeypatch, tmp_path):
    monkeypatch.delenv("DAEMA_OUTPUT_DIR", raising=False)
    assert str(output_dir()) == "results"
    monkeypatch.setenv("DAEMA_OUTPUT_DIR", str(tmp_path))
    assert output_dir() == tmp_path
