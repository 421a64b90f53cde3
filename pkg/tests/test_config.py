import math
import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from needlet_regression.config import (
    THREADS_ENV,
    ConfigError,
    ExperimentConfig,
    load_config,
    preset,
    save_config,
    threads_from_env,
    with_overrides,
    write_default_config,
)


class ExperimentConfigTestCase(unittest.TestCase):
    def test_defaults_from_empty_mapping(self) -> None:
        cfg = ExperimentConfig.from_dict({})
        self.assertEqual(cfg.test_function, "F2")
        self.assertEqual(cfg.n, (64, 128, 256))
        self.assertEqual(cfg.sigma_fracs, (0.25, 0.5, 0.75))
        self.assertEqual(cfg.replicates, 200)
        self.assertIsNone(cfg.output)

    def test_round_trip(self) -> None:
        cfg = ExperimentConfig.from_dict(
            {
                "test_function": "F3",
                "n": 512,
                "p": "inf",
                "noise": "rademacher_scaled",
                "sigma_fracs": [0.1],
                "seed": 9,
                "output": "/tmp/report.csv",
                "window": "bspline",
            }
        )
        self.assertEqual(cfg.n, (512,))
        self.assertTrue(math.isinf(cfg.p))
        payload = cfg.to_dict()
        self.assertEqual(payload["p"], "inf")
        self.assertEqual(ExperimentConfig.from_dict(payload), cfg)

    def test_rejects_invalid_values(self) -> None:
        cases = [
            ({"test_function": "F9"}, "test_function"),
            ({"d": 2}, "'d'"),
            ({"B": 1}, "'B'"),
            ({"n": [64, 1]}, "'n'"),
            ({"n": []}, "'n'"),
            ({"p": 1}, "'p'"),
            ({"p": "two"}, "'p'"),
            ({"noise": "cauchy"}, "noise"),
            ({"sigma_fracs": [-0.1]}, "sigma_fracs"),
            ({"replicates": 0}, "replicates"),
            ({"replicates": True}, "replicates"),
            ({"seed": -1}, "seed"),
            ({"grid_size": 128}, "grid_size"),
            ({"output": 3}, "output"),
            ({"window": "box"}, "window"),
        ]
        for data, key in cases:
            with self.subTest(data=data):
                with self.assertRaises(ConfigError) as ctx:
                    ExperimentConfig.from_dict(data)
                self.assertIn(key, str(ctx.exception))

    def test_presets(self) -> None:
        self.assertEqual(preset("example-4.1").test_function, "F1")
        self.assertEqual(preset("example-4.2").test_function, "F2")
        cfg = preset("example-4.3")
        self.assertEqual((cfg.test_function, cfg.B, cfg.d, cfg.p), ("F3", 2.0, 1, 2.0))
        with self.assertRaises(ConfigError) as ctx:
            preset("cubic")
        self.assertIn("example-4.2", str(ctx.exception))

    def test_preset_aliases(self) -> None:
        for alias, name in (("constant", "example-4.1"), ("single-mode", "example-4.2"), ("mixed", "example-4.3")):
            self.assertEqual(preset(alias), preset(name))

    def test_overrides_skip_none(self) -> None:
        cfg = preset("example-4.2")
        self.assertIs(with_overrides(cfg, seed=None), cfg)
        self.assertEqual(with_overrides(cfg, seed=5, replicates=None).seed, 5)


class ConfigFileTestCase(unittest.TestCase):
    def test_save_and_load(self) -> None:
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "nested" / "experiment.json"
            cfg = ExperimentConfig(test_function="F1", n=(32,), replicates=3)
            save_config(path, cfg)
            self.assertTrue(path.read_text(encoding="utf-8").endswith("\n"))
            self.assertEqual(load_config(path), cfg)

    def test_load_errors(self) -> None:
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "experiment.json"
            with self.assertRaises(ConfigError):
                load_config(path)
            path.write_text("[1, 2]", encoding="utf-8")
            with self.assertRaises(ConfigError):
                load_config(path)
            path.write_text("{not json", encoding="utf-8")
            with self.assertRaises(ConfigError):
                load_config(path)

    def test_write_default_keeps_existing_file(self) -> None:
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "experiment.json"
            save_config(path, ExperimentConfig(seed=77))
            write_default_config(path)
            self.assertEqual(load_config(path).seed, 77)
            write_default_config(path, overwrite=True)
            self.assertEqual(load_config(path).seed, 0)


class ThreadsTestCase(unittest.TestCase):
    def test_env_override(self) -> None:
        with mock.patch.dict(os.environ, {THREADS_ENV: "3"}):
            self.assertEqual(threads_from_env(), 3)
        with mock.patch.dict(os.environ, {THREADS_ENV: ""}):
            self.assertEqual(threads_from_env(default=2), 2)

    def test_env_rejects_garbage(self) -> None:
        for raw in ("zero", "0", "-4"):
            with mock.patch.dict(os.environ, {THREADS_ENV: raw}):
                with self.assertRaises(ConfigError):
                    threads_from_env()


if __name__ == "__main__":
    unittest.main()
