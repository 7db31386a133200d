import json

import pytest

from cxr_triage.service.cli import build_parser, cmd_serve, main
from cxr_triage.service.config import ServiceConfig, load_config, parse_config_text


@pytest.fixture()
def fixture_cfg(corpus, tmp_path):
    path = tmp_path / "triage.cfg"
    path.write_text(
        "# replayed backend for reproducible batch runs\n"
        "backend.kind = fixture\n"
        f"backend.fixture_path = {corpus.fixture_path}\n"
        f"service.store_dir = {tmp_path / 'store'}\n"
    )
    return str(path)


def corpus_file(corpus, name):
    return next(p for p in corpus.files if p.name.endswith(f"_{name}.dcm"))


class TestConfig:
    def test_parse_lines(self):
        values = parse_config_text("a.b = 1\n# note\n\nc.d= x =y\n")
        assert values == {"a.b": "1", "c.d": "x =y"}

    def test_parse_rejects_bare_words(self):
        with pytest.raises(ValueError, match="line 1"):
            parse_config_text("just-a-word\n")

    def test_defaults(self):
        cfg = load_config(None, env={})
        assert cfg == ServiceConfig()

    def test_file_values_and_env_override(self, tmp_path):
        path = tmp_path / "svc.cfg"
        path.write_text("server.port = 9000\nservice.workers = 5\n")
        cfg = load_config(path, env={})
        assert (cfg.port, cfg.workers) == (9000, 5)
        cfg = load_config(path, env={"CXR_SERVER_PORT": "7777"})
        assert (cfg.port, cfg.workers) == (7777, 5)

    def test_invalid_values_rejected(self, tmp_path):
        path = tmp_path / "svc.cfg"
        path.write_text("backend.kind = cloud\n")
        with pytest.raises(ValueError, match="backend.kind"):
            load_config(path, env={})
        with pytest.raises(ValueError, match="fixture"):
            load_config(None, env={"CXR_BACKEND_KIND": "fixture"})


class TestRun:
    def test_batch_is_reproducible(self, corpus, fixture_cfg, tmp_path):
        outs = []
        for i in (1, 2):
            out = tmp_path / f"run{i}.ndjson"
            inputs = [str(p) for p in corpus.files]
            rc = main(["run", *inputs, "--config", fixture_cfg, "--out", str(out)])
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        lines = outs[0].decode().splitlines()
        assert len(lines) == len(corpus.studies)
        assert all("study_id" in json.loads(line) for line in lines)

    def test_single_file_to_stdout(self, corpus, fixture_cfg, capsys):
        rc = main(["run", str(corpus_file(corpus, "normal-0")), "--config", fixture_cfg])
        assert rc == 0
        (line,) = capsys.readouterr().out.splitlines()
        rec = json.loads(line)
        assert rec["decision"] == "Normal"
        assert rec["status"] == "AwaitingReview"

    def test_no_inputs_exits_nonzero(self, fixture_cfg, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        rc = main(["run", str(empty), "--config", fixture_cfg])
        assert rc == 2
        assert "no input files" in capsys.readouterr().err


class TestEvaluate:
    @pytest.fixture()
    def pred_and_ref(self, corpus, fixture_cfg, tmp_path):
        """A batch run plus a reference file that echoes every prediction."""
        pred = tmp_path / "pred.ndjson"
        inputs = [str(p) for p in corpus.files]
        main(["run", *inputs, "--config", fixture_cfg, "--out", str(pred)])
        ref = tmp_path / "ref.ndjson"
        with open(ref, "w") as fh:
            for line in pred.read_text().splitlines():
                rec = json.loads(line)
                if "decision" not in rec:
                    continue
                fh.write(
                    json.dumps(
                        {
                            "study_id": rec["study_id"],
                            "reference": rec["decision"],
                            "annotations": [
                                {k: d[k] for k in ("label", "x1", "y1", "x2", "y2")}
                                for d in rec["detections"]
                            ],
                            **rec["attributes"],
                        }
                    )
                    + "\n"
                )
        return pred, ref

    def test_perfect_agreement_report(self, pred_and_ref, capsys):
        pred, ref = pred_and_ref
        rc = main(["evaluate", "--pred", str(pred), "--ref", str(ref)])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.startswith("Pathology,AUC,Precision (%),Recall (%)\n")
        for metric in ("PPV", "NPV", "PPA", "NPA"):
            assert f"{metric},100.00," in out
        assert "Pneumothorax,1.00,100.00,100.00" in out

    def test_subgroup_and_markdown(self, pred_and_ref, capsys):
        pred, ref = pred_and_ref
        rc = main([
            "evaluate", "--pred", str(pred), "--ref", str(ref),
            "--by", "gender", "--format", "markdown",
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "## Per-pathology detection" in out
        assert "## Subgroup: gender" in out
        assert "| Male |" in out

    def test_unknown_format_rejected(self, pred_and_ref, capsys):
        pred, ref = pred_and_ref
        with pytest.raises(SystemExit):
            main(["evaluate", "--pred", str(pred), "--ref", str(ref), "--format", "html"])


class TestMakeFixture:
    def test_recorded_fixture_replays_identically(self, corpus, tmp_path, capsys):
        inputs = [
            str(corpus_file(corpus, name)) for name in ("normal-0", "abnormal-critical-0")
        ]
        recorded = tmp_path / "recorded.ndjson"
        rc = main(["make-fixture", *inputs, "--out", str(recorded)])
        assert rc == 0
        assert "recorded" in capsys.readouterr().out

        live_out = tmp_path / "live.ndjson"
        main(["run", *inputs, "--out", str(live_out)])

        replay_cfg = tmp_path / "replay.cfg"
        replay_cfg.write_text(
            f"backend.kind = fixture\nbackend.fixture_path = {recorded}\n"
        )
        replay_out = tmp_path / "replay.ndjson"
        main(["run", *inputs, "--config", str(replay_cfg), "--out", str(replay_out)])
        assert replay_out.read_bytes() == live_out.read_bytes()


class TestServe:
    def test_argument_wiring(self):
        args = build_parser().parse_args(["serve", "--host", "0.0.0.0", "--port", "9999"])
        assert args.func is cmd_serve
        assert (args.host, args.port) == ("0.0.0.0", 9999)

    def test_unknown_command_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["explode"])
