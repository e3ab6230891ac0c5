import json

import numpy as np

from skconverse import save_dist
from skconverse.cli import main
from skconverse.protosim import protocol_to_json, random_sk_instance
from support import ber, dsbs, random_dist


def write_dist(tmp_path, J, name):
    path = tmp_path / name
    save_dist(J, path)
    return str(path)


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_beta_verb(tmp_path, capsys):
    p = write_dist(tmp_path, ber(0.3), "p.json")
    q = write_dist(tmp_path, ber(0.5), "q.json")
    code, out, _ = run(capsys, ["beta", "--p", p, "--q", q, "--eps", "0.1"])
    assert code == 0
    doc = json.loads(out)
    assert doc["version"]
    assert abs(doc["result"]["beta"] - 5 / 6) <= 1e-12


def test_bound_sk_verb(tmp_path, capsys):
    d = write_dist(tmp_path, dsbs(0.11), "d.json")
    code, out, _ = run(
        capsys,
        ["bound", "sk", "--dist", d, "--eps", "0.1", "--eta", "0.05",
         "--all-partitions"],
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["result"]["value"] > 0
    assert doc["result"]["partition"] == "1|2"

    code, out, _ = run(capsys, ["bound", "sk", "--dist", d, "--capacity"])
    assert code == 0
    assert abs(json.loads(out)["result"]["value"] - 0.500084041835472) <= 1e-9


def test_bound_ot_bc_compute_transmit(tmp_path, capsys):
    rng = np.random.default_rng(3)
    d = write_dist(tmp_path, random_dist(rng, [3, 3], names=["X1", "X2"]), "j.json")
    code, out, _ = run(
        capsys,
        ["bound", "ot", "--dist", d, "--eps", "0.02", "--delta1", "0.02",
         "--delta2", "0.02", "--xi", "0.05"],
    )
    assert code == 0 and json.loads(out)["result"]["value"] > 0

    code, out, _ = run(capsys, ["bound", "bc", "--dist", d, "--capacity"])
    assert code == 0

    g = tmp_path / "g.json"
    g.write_text(json.dumps(["0", "1", "0", "1", "0", "1", "0", "1", "0"]))
    code, out, _ = run(
        capsys,
        ["bound", "compute", "--dist", d, "--g", str(g),
         "--eps", "0.02", "--delta", "0.02"],
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["result"]["passed"] in (True, False)

    m = write_dist(tmp_path, ber(0.5), "m.json")
    code, out, _ = run(
        capsys,
        ["bound", "transmit", "--dist", m, "--kappa", "4",
         "--eps", "0.02", "--delta", "0.02"],
    )
    assert code == 0
    assert json.loads(out)["result"]["passed"] is True


def test_scan_verbs(tmp_path, capsys):
    p = write_dist(tmp_path, ber(0.3), "p.json")
    q = write_dist(tmp_path, ber(0.5), "q.json")
    code, out, _ = run(
        capsys, ["scan", "stein", "--p", p, "--q", q, "--eps", "0.1", "--n", "10,100"]
    )
    assert code == 0
    assert out.splitlines()[0] == "n,neg_log_beta_over_n,kl_limit"
    assert len(out.strip().splitlines()) == 3

    code, out, _ = run(
        capsys, ["scan", "dmax", "--p", p, "--q", q, "--eps", "0.25", "--n", "10"]
    )
    assert code == 0
    assert out.splitlines()[0] == "n,dmax_eps_over_n,kl_limit"

    d = write_dist(tmp_path, dsbs(0.11), "d.json")
    code, out, _ = run(
        capsys,
        ["scan", "capacity", "--dist", d, "--eps", "0.1", "--eta", "0.05",
         "--n", "10,50"],
    )
    assert code == 0
    assert out.splitlines()[0] == "n,cit_bound_over_n,capacity_limit"


def test_structure_verbs(tmp_path, capsys):
    d = write_dist(tmp_path, dsbs(0.11), "d.json")
    code, out, _ = run(capsys, ["structure", "mcf", "--dist", d, "--v1", "X1", "--v2", "X2"])
    assert code == 0
    doc = json.loads(out)
    assert doc["result"]["num_labels"] == 1

    code, out, _ = run(
        capsys, ["structure", "mss", "--dist", d, "--given", "X1", "--target", "X2"]
    )
    assert code == 0
    assert json.loads(out)["result"]["num_labels"] == 2


def test_smooth_verbs(tmp_path, capsys):
    d = write_dist(tmp_path, ber(0.5), "d.json")
    code, out, _ = run(capsys, ["smooth", "hmin", "--dist", d, "--eps", "0.1"])
    assert code == 0
    p = write_dist(tmp_path, ber(0.6), "p.json")
    q = write_dist(tmp_path, ber(0.5), "q.json")
    code, out, _ = run(capsys, ["smooth", "dmax", "--p", p, "--q", q, "--eps", "0.2"])
    assert code == 0
    assert abs(json.loads(out)["result"]["value"] - (-0.3219280948873623)) <= 1e-12


def test_protocol_verbs(tmp_path, capsys):
    J, proto = random_sk_instance([9, 0], m=2, rounds=1)
    d = write_dist(tmp_path, J, "j.json")
    pfile = tmp_path / "p.json"
    pfile.write_text(json.dumps(protocol_to_json(proto)))
    code, out, _ = run(capsys, ["protocol", "eval", "--dist", d, "--protocol", str(pfile)])
    assert code == 0
    doc = json.loads(out)
    assert 0.0 <= doc["result"]["eps"] <= 1.0

    for kind in ("ot1", "ot2", "bc"):
        code, out, _ = run(capsys, ["protocol", "reduce", "--kind", kind, "--length", "1"])
        assert code == 0
        assert json.loads(out)["result"]["within_reduction_bound"] is True

    code, out, _ = run(capsys, ["protocol", "fuzz", "--count", "10", "--seed", "3"])
    assert code == 0
    assert json.loads(out)["result"]["ok"] is True


def test_determinism_byte_identical(tmp_path, capsys):
    d = write_dist(tmp_path, dsbs(0.2), "d.json")
    argv = ["bound", "sk", "--dist", d, "--eps", "0.1", "--eta", "0.05"]
    _, out1, _ = run(capsys, argv)
    _, out2, _ = run(capsys, argv)
    assert out1 == out2

    _, f1, _ = run(capsys, ["protocol", "fuzz", "--count", "5", "--seed", "11"])
    _, f2, _ = run(capsys, ["protocol", "fuzz", "--count", "5", "--seed", "11"])
    assert f1 == f2


def test_output_file(tmp_path, capsys):
    d = write_dist(tmp_path, ber(0.3), "p.json")
    q = write_dist(tmp_path, ber(0.5), "q.json")
    outp = tmp_path / "report.json"
    code, _, _ = run(
        capsys, ["beta", "--p", d, "--q", q, "--eps", "0.1", "--out", str(outp)]
    )
    assert code == 0
    assert json.loads(outp.read_text())["command"] == "beta"


def test_error_exits(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    q = write_dist(tmp_path, ber(0.5), "q.json")
    code, _, err = run(capsys, ["beta", "--p", str(bad), "--q", q, "--eps", "0.1"])
    assert code == 1 and "malformed" in err

    code, _, err = run(capsys, ["beta", "--p", q, "--q", q, "--eps", "1.5"])
    assert code == 1 and "eps" in err

    code, _, err = run(capsys, ["nonsense"])
    assert code == 1

    code, _, err = run(capsys, ["beta", "--p", q, "--q", q])
    assert code == 1 and "--eps" in err

    # missing file
    code, _, err = run(capsys, ["beta", "--p", str(tmp_path / "nope.json"), "--q", q,
                                "--eps", "0.1"])
    assert code == 1


def test_params_file_merging(tmp_path, capsys):
    p = write_dist(tmp_path, ber(0.3), "p.json")
    q = write_dist(tmp_path, ber(0.5), "q.json")
    params = tmp_path / "params.json"
    params.write_text(json.dumps({"eps": 0.1}))
    code, out, _ = run(capsys, ["beta", "--p", p, "--q", q, "--params", str(params)])
    assert code == 0
    assert abs(json.loads(out)["result"]["beta"] - 5 / 6) <= 1e-12


def test_failing_check_is_still_exit_zero(tmp_path, capsys):
    # a violated necessary condition is a verdict, not a process error
    n = 8
    short, long = 1 << n, 1 << (2 * n)
    from skconverse import Alphabet, JointDist

    syms = tuple(f"s{i}" for i in range(short)) + tuple(f"l{i}" for i in range(long))
    pmf = [0.5 / short] * short + [0.5 / long] * long
    mix = JointDist((("Y", Alphabet(syms)),), pmf)
    d = write_dist(tmp_path, mix, "mix.json")
    code, out, _ = run(
        capsys,
        ["bound", "transmit", "--dist", d, "--kappa", "4", "--eps", "0",
         "--delta", "0", "--xi", "0.25", "--zeta", "0.2", "--eta", "0.2"],
    )
    assert code == 0
    assert json.loads(out)["result"]["passed"] is False


def test_thread_env_does_not_change_results(tmp_path, capsys, monkeypatch):
    p = write_dist(tmp_path, ber(0.3), "p.json")
    q = write_dist(tmp_path, ber(0.5), "q.json")
    argv = ["scan", "stein", "--p", p, "--q", q, "--eps", "0.1", "--n", "10,50,100"]
    _, serial, _ = run(capsys, argv)
    monkeypatch.setenv("SKCONVERSE_THREADS", "4")
    _, threaded, _ = run(capsys, argv)
    assert serial == threaded
