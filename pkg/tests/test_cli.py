import numpy as np

from certpoison.cli import main
from certpoison.evalharness import load_csv, load_poison, read_report


def run(argv):
    return main([str(a) for a in argv])


class TestCli:
    def test_gen_data_writes_csvs(self, tmp_path):
        out = tmp_path / "data"
        assert run(["gen-data", "--kind", "gauss-toy", "--n-per-class", "40",
                    "--n-val", "20", "--n-eval", "20", "--seed", "1",
                    "--out", out]) == 0
        batch = load_csv(out / "train.csv", feature_range=(-5, 5))
        assert len(batch) == 80
        assert (out / "val.csv").exists() and (out / "eval.csv").exists()

    def test_attack_then_retrain_certify_and_report(self, tmp_path, capsys):
        data = tmp_path / "data"
        run(["gen-data", "--kind", "gauss-toy", "--n-per-class", "60",
             "--n-val", "30", "--n-eval", "30", "--seed", "2", "--out", data])
        poison_dir = tmp_path / "poison"
        code = run(["attack", "--data", data, "--method", "pacd-gauss-aug",
                    "--eps", "0.1", "--sigma", "0.25", "--seed", "2",
                    "--outer-iters", "4", "--t1", "5", "--t2", "5",
                    "--tau", "2.0", "--rho", "0.3", "--beta", "0.2",
                    "--reinit-every", "0", "--clean-batch", "60",
                    "--poison-batch", "60", "--val-batch", "30", "--k", "8",
                    "--feature-lo", "-5", "--feature-hi", "5",
                    "--box-lo", "-5", "--box-hi", "5", "--out", poison_dir])
        assert code == 0
        ps = load_poison(poison_dir)
        assert np.abs(ps.delta).max() <= 0.1 + 1e-7

        report_path = tmp_path / "report.txt"
        code = run(["retrain-certify", "--data", data, "--poison", poison_dir,
                    "--method", "gauss_aug", "--seeds", "1", "--sigma", "0.25",
                    "--epochs", "20", "--lr", "0.01", "--n0", "20",
                    "--n", "2000", "--alpha", "0.01", "--cert-batch", "2000",
                    "--feature-lo", "-5", "--feature-hi", "5",
                    "--box-lo", "-5", "--box-hi", "5", "--out", report_path])
        assert code == 0
        report = read_report(report_path)
        assert report.rows and report.rows[0].status == "ok"

        code = run(["report", report_path])
        assert code == 0
        out = capsys.readouterr().out
        assert "gauss_aug" in out

    def test_watermark_attack(self, tmp_path):
        data = tmp_path / "data"
        run(["gen-data", "--kind", "blobs", "--dim", "16", "--n-per-class",
             "20", "--n-val", "8", "--n-eval", "8", "--seed", "3",
             "--out", data])
        poison_dir = tmp_path / "wm"
        code = run(["attack", "--data", data, "--method", "watermark",
                    "--eps", "0.05", "--seed", "3", "--out", poison_dir])
        assert code == 0
        ps = load_poison(poison_dir)
        assert np.abs(ps.delta).max() <= 0.05 + 1e-7

    def test_oracle_command(self, capsys):
        assert run(["oracle", "--instances", "10"]) == 0
        out = capsys.readouterr().out
        assert "0.42426" in out and "10/10" in out

    def test_transfer_sweeps_and_emp_robust(self, tmp_path, capsys):
        data = tmp_path / "data"
        run(["gen-data", "--kind", "gauss-toy", "--n-per-class", "50",
             "--n-val", "25", "--n-eval", "20", "--seed", "6", "--out", data])
        wm_dir = tmp_path / "wm"
        run(["attack", "--data", data, "--method", "watermark", "--eps", "0.1",
             "--seed", "6", "--feature-lo", "-5", "--feature-hi", "5",
             "--box-lo", "-5", "--box-hi", "5", "--out", wm_dir])

        common = ["--feature-lo", "-5", "--feature-hi", "5", "--box-lo", "-5",
                  "--box-hi", "5", "--seeds", "1", "--epochs", "10",
                  "--lr", "0.01", "--k", "4"]
        cert_flags = ["--n0", "20", "--n", "500", "--alpha", "0.01",
                      "--cert-batch", "500"]
        out_dir = tmp_path / "transfer"
        assert run(["transfer", "--data", data, "--poisons",
                    f"gauss_aug={wm_dir}", "--methods", "standard,gauss_aug",
                    "--out", out_dir] + common + cert_flags) == 0
        assert len(list(out_dir.glob("transfer_*.txt"))) == 2

        sweep_dir = tmp_path / "sweep"
        assert run(["sweep-eps", "--data", data, "--eps-list", "0,0.05",
                    "--outer-iters", "3", "--t1", "3", "--t2", "3",
                    "--tau", "1.0", "--rho", "0.3", "--beta", "0.2",
                    "--reinit-every", "0", "--clean-batch", "50",
                    "--poison-batch", "50", "--val-batch", "25",
                    "--out", sweep_dir] + common + cert_flags) == 0
        assert (sweep_dir / "plot_data.txt").exists()

        decay_dir = tmp_path / "decay"
        assert run(["sweep-decay", "--data", data, "--poison", wm_dir,
                    "--decay-list", "0,1e-2", "--out", decay_dir] + common + cert_flags) == 0
        assert (decay_dir / "plot_data.txt").exists()

        capsys.readouterr()
        assert run(["emp-robust", "--data", data, "--poison", wm_dir,
                    "--m-aug", "6", "--pgd-iters", "5", "--points", "5",
                    "--bound-lo", "0.01", "--bound-hi", "3.0"] + common) == 0
        out = capsys.readouterr().out
        assert "mean over seeds" in out

    def test_bad_input_exit_code(self, tmp_path):
        missing = tmp_path / "nope"
        code = run(["attack", "--data", missing, "--method", "pacd-gauss-aug",
                    "--out", tmp_path / "x"])
        assert code == 1

    def test_parse_error_exit_code(self, tmp_path):
        data = tmp_path / "data"
        data.mkdir()
        (data / "train.csv").write_text("0.1,oops,0\n")
        (data / "val.csv").write_text("0.1,0.2,0\n")
        (data / "eval.csv").write_text("0.1,0.2,0\n")
        code = run(["retrain-certify", "--data", data, "--poison", data,
                    "--out", tmp_path / "r.txt"])
        assert code == 1

    def test_config_file_merging(self, tmp_path, capsys):
        cfg = tmp_path / "settings.cfg"
        cfg.write_text("instances = 3\n")
        assert run(["oracle", "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert "3/3" in out

    def test_plot_data_emission(self, tmp_path, capsys):
        report_path = tmp_path / "r.txt"
        from certpoison.evalharness import (make_gauss_toy_splits,
                                            retrain_and_certify, write_report)
        from certpoison.attack import PoisonSet
        from certpoison.analytic import GaussToyConfig
        from certpoison.smoothing import CertifyConfig, SmoothingConfig
        from certpoison.training import TrainConfig
        splits = make_gauss_toy_splits(GaussToyConfig(n_per_class=40), seed=4,
                                       n_val=15, n_eval=15)
        ps = PoisonSet(splits.base.x, splits.base.y,
                       np.zeros_like(splits.base.x), 0.0, box=(-5, 5))
        tc = TrainConfig("gauss_aug", SmoothingConfig(sigma=0.25, k=4), lr=0.01,
                         epochs=10, batch_size=40, seed=0)
        rep = retrain_and_certify(ps, splits.clean, splits.eval_pts,
                                  "gauss_aug", tc,
                                  CertifyConfig(n0=20, n=500, alpha_fail=0.01,
                                                batch=500),
                                  n_seeds=1, box=(-5, 5))
        write_report(rep, report_path)
        capsys.readouterr()  # drop anything buffered so far
        assert run(["report", "--plot-data", "--xs", "0.1", report_path]) == 0
        out = capsys.readouterr().out
        parts = out.strip().split()
        assert len(parts) == 3 and parts[0] == "0.1"
