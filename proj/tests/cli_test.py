#!/usr/bin/env python3
"""End-to-end exercise of the sqbox command-line tool.

Usage: cli_test.py /path/to/sqbox
"""

import json
import os
import subprocess
import sys
import tempfile

BIN = os.path.abspath(sys.argv[1])
CHECKS = 0


def ok(condition, label):
    global CHECKS
    CHECKS += 1
    if not condition:
        raise SystemExit("FAIL: " + label)


def run(*args, env_extra=None, expect=0):
    env = dict(os.environ)
    env.pop("SQBOX_OUT_DIR", None)
    if env_extra:
        env.update(env_extra)
    proc = subprocess.run([BIN] + list(args), capture_output=True,
                          text=True, env=env)
    if expect is not None:
        ok(proc.returncode == expect,
           "exit %d != %d for: %s\nstdout: %s\nstderr: %s" %
           (proc.returncode, expect, " ".join(args), proc.stdout,
            proc.stderr))
    return proc


def read(path):
    with open(path, "rb") as f:
        return f.read()


def jsonl_records(path):
    with open(path) as f:
        lines = [line for line in f if line.strip()]
    return lines[0], [json.loads(line) for line in lines[1:]]


def check_help_and_usage():
    proc = run("--help")
    for name in ("simulate", "fit", "predict", "evaluate", "experiment",
                 "plot-data"):
        ok(name in proc.stdout, "--help lists " + name)
    run("simulate", "--help")

    proc = run(expect=2)
    ok(proc.returncode == 2, "no subcommand exits 2")
    run("simulate", "--env", "swamp", "--out", "x.jsonl", expect=2)
    run("frobnicate", expect=2)


def check_simulate(tmp):
    a = os.path.join(tmp, "sim-a.jsonl")
    b = os.path.join(tmp, "sim-b.jsonl")
    c = os.path.join(tmp, "sim-c.jsonl")
    proc = run("simulate", "--env", "tamarisk", "--n", "30", "--horizon",
               "6", "--seed", "9", "--out", a)
    ok("wrote" in proc.stdout, "simulate reports the output path")
    run("simulate", "--env", "tamarisk", "--n", "30", "--horizon", "6",
        "--seed", "9", "--out", b)
    run("simulate", "--env", "tamarisk", "--n", "30", "--horizon", "6",
        "--seed", "10", "--out", c)
    ok(read(a) == read(b), "same seed reproduces the trajectory file")
    ok(read(a) != read(c), "a different seed changes the file")

    meta, records = jsonl_records(a)
    ok('"kind":"trajectories"' in meta.replace(" ", ""),
       "meta line carries the kind tag")
    ok(len(records) == 30, "one line per trajectory")
    for r in records:
        ok(len(r["start_features"]) == 7, "tamarisk start has 7 slots")
        ok(len(r["rewards"]) == 6, "horizon 6 rewards")
        ok(len(r["behavior"]) == 6, "horizon 6 behavior")
        ok(all(v in (0.0, 1.0, 2.0) for v in r["start_features"]),
           "slot codes")

    # The output directory override applies to relative paths.
    outdir = os.path.join(tmp, "outenv")
    os.mkdir(outdir)
    run("simulate", "--env", "tamarisk", "--n", "3", "--horizon", "4",
        "--seed", "1", "--out", "sim-env.jsonl",
        env_extra={"SQBOX_OUT_DIR": outdir})
    ok(os.path.exists(os.path.join(outdir, "sim-env.jsonl")),
       "SQBOX_OUT_DIR redirects relative outputs")


def check_battle_pipeline(tmp):
    train = os.path.join(tmp, "battle-train.jsonl")
    test = os.path.join(tmp, "battle-test.jsonl")
    model = os.path.join(tmp, "model.json")
    run("simulate", "--env", "battle", "--n", "240", "--horizon", "20",
        "--no-noise", "--seed", "4", "--out", train)
    run("simulate", "--env", "battle", "--n", "300", "--horizon", "20",
        "--no-noise", "--seed", "5", "--out", test)

    proc = run("fit", "--input", train, "--method", "sqbox", "--l", "120",
               "--m", "40", "--delta", "0.2", "--delta-prime", "0.2",
               "--trees", "25", "--min-leaf", "10", "--seed", "2",
               "--out", model)
    ok("sqbox model" in proc.stdout, "fit reports the model summary")
    doc = json.loads(read(model))
    ok(doc["format"] == "sqbox-model", "model format tag")
    ok(doc["beta"] >= 0.0, "nonnegative conformal margin")

    # Refitting, with a different worker count, reproduces the file.
    model2 = os.path.join(tmp, "model2.json")
    run("fit", "--input", train, "--method", "sqbox", "--l", "120",
        "--m", "40", "--delta", "0.2", "--delta-prime", "0.2",
        "--trees", "25", "--min-leaf", "10", "--seed", "2",
        "--workers", "2", "--out", model2)
    ok(read(model) == read(model2), "fit is worker-count independent")

    proc = run("predict", "--model", model, "--start", "12,8")
    lines = proc.stdout.strip().splitlines()
    ok(lines[0].startswith("# sqbox-model delta 0.2 beta "),
       "predict header")
    ok(lines[1] == "t\tlo\thi", "predict column header")
    ok(len(lines) == 22, "one row per timestep")
    for line in lines[2:]:
        t, lo, hi = line.split("\t")
        ok(float(lo) <= float(hi), "band rows ordered at t=" + t)

    proc2 = run("predict", "--model", model, "--input", train, "--index",
                "3")
    ok(proc2.stdout.splitlines()[1] == "t\tlo\thi",
       "predict from a trajectory file")
    run("predict", "--model", model, "--input", train, "--index", "999",
        expect=3)
    run("predict", "--model", model, expect=3)
    proc = run("predict", "--model", model, "--start", "12,8,oops",
               expect=3)
    ok("error:" in proc.stderr, "bad start vector is reported")

    report = os.path.join(tmp, "report.json")
    proc = run("evaluate", "--model", model, "--input", test,
               "--ci-confidence", "0.9", "--out", report)
    ok("coverage" in proc.stderr, "evaluate prints a summary line")
    doc = json.loads(read(report))
    ok(doc["kind"] == "coverage-report", "report kind")
    ok(doc["n"] == 300 and doc["horizon"] == 20, "report dimensions")
    ok(0.6 <= doc["coverage"] <= 0.98, "coverage near the 0.8 target")
    ok(doc["ci_lower"] <= doc["coverage"], "lower bound below the mean")
    ok(doc["mean_width"] > 0.0, "bands have width")
    ok(len(doc["violation_rate_by_t"]) == 20, "per-step violation rates")
    ok(doc["model"]["format"] == "sqbox-model", "report embeds the model")

    cte = os.path.join(tmp, "cte.json")
    proc = run("fit", "--input", train, "--method", "cte", "--l", "120",
               "--delta", "0.2", "--trees", "25", "--min-leaf", "10",
               "--seed", "2", "--out", cte)
    ok("cte model" in proc.stdout, "cte fit summary")
    proc = run("evaluate", "--model", cte, "--input", test,
               "--ci-confidence", "0.9")
    doc = json.loads(proc.stdout)
    ok(doc["c_hat"] >= 0.0, "certificate bound present")
    ok(0.0 <= doc["band_coverage"] <= doc["coverage"] + 1e-12,
       "certificate coverage dominates band coverage")

    # Validation and I/O failures map to distinct exit codes.
    bad = os.path.join(tmp, "bad-model.json")
    run("fit", "--input", train, "--method", "sqbox", "--l", "400",
        "--out", bad, expect=3)
    short = os.path.join(tmp, "battle-short.jsonl")
    run("simulate", "--env", "battle", "--n", "20", "--horizon", "19",
        "--no-noise", "--seed", "6", "--out", short)
    proc = run("evaluate", "--model", model, "--input", short, expect=3)
    ok("horizon" in proc.stderr, "horizon mismatch is explained")
    run("fit", "--input", os.path.join(tmp, "nope.jsonl"), "--method",
        "sqbox", "--out", bad, expect=4)
    run("predict", "--model", os.path.join(tmp, "nope.json"), "--start",
        "1,2", expect=4)
    run("predict", "--model", train, "--start", "12,8", expect=4)


def check_quantile_experiment(tmp):
    out1 = os.path.join(tmp, "qci-1")
    out2 = os.path.join(tmp, "qci-2")
    os.mkdir(out1)
    os.mkdir(out2)
    run("experiment", "quantile-ci", "--quick", "--seed", "7",
        "--out-dir", out1)
    report = os.path.join(out1, "quantile-ci-report.json")
    doc = json.loads(read(report))
    ok(doc["kind"] == "quantile-ci-study", "study kind")
    ok(len(doc["records"]) == 8, "2 sizes x 4 deltas")
    for r in doc["records"]:
        ok(0.0 <= r["strict_success"] <= 1.0, "strict success is a rate")
        ok(r["ucb_success"] >= r["strict_success"],
           "inflated rank dominates")

    for name in ("quantile-ci-success.csv", "quantile-ci-median.csv"):
        path = os.path.join(out1, name)
        lines = read(path).decode().splitlines()
        ok(lines[0] == "x,y,series", "csv header in " + name)
        ok(len(lines) == 17, "8 records x 2 series in " + name)

    # plot-data re-derives byte-identical panels from the report.
    run("plot-data", "--report", report, "--out-dir", out2)
    for name in ("quantile-ci-success.csv", "quantile-ci-median.csv"):
        ok(read(os.path.join(out1, name)) == read(os.path.join(out2, name)),
           name + " re-emitted identically")
    run("plot-data", "--report", os.path.join(tmp, "nope.json"),
        "--out-dir", out2, expect=4)
    not_report = os.path.join(tmp, "not-report.json")
    with open(not_report, "w") as f:
        f.write('{"kind":"mystery"}')
    run("plot-data", "--report", not_report, "--out-dir", out2, expect=3)


def check_gaussian_experiment(tmp):
    out1 = os.path.join(tmp, "gauss-1")
    out2 = os.path.join(tmp, "gauss-2")
    os.mkdir(out1)
    os.mkdir(out2)
    args = ("experiment", "gaussian", "--quick", "--replications", "3",
            "--deltas", "0.2", "0.1", "--seed", "6")
    run(*args, "--out-dir", out1)
    run(*args, "--out-dir", out2)
    report = os.path.join(out1, "gaussian-report.json")
    ok(read(report) == read(os.path.join(out2, "gaussian-report.json")),
       "gaussian study reruns byte-identically")
    doc = json.loads(read(report))
    ok(doc["kind"] == "gaussian-study", "study kind")
    ok(len(doc["records"]) == 12, "3 methods x 2 rhos x 2 deltas")
    for r in doc["records"]:
        ok(0.5 <= r["mean_coverage"] <= 1.0, "coverage in range")
        ok(r["mean_width"] > 0.0, "positive width")
    for name in ("gaussian-coverage.csv", "gaussian-coverage-quantile.csv",
                 "gaussian-width.csv"):
        ok(os.path.exists(os.path.join(out1, name)), name + " written")


def check_mdp_experiment(tmp):
    out = os.path.join(tmp, "tam")
    os.mkdir(out)
    run("experiment", "tamarisk", "--quick", "--pool", "400", "--test",
        "150", "--sizes", "50", "100", "--deltas", "0.2", "--m", "25",
        "--trees", "15", "--min-leaf", "10", "--seed", "8",
        "--out-dir", out)
    doc = json.loads(read(os.path.join(out, "tamarisk-report.json")))
    ok(doc["kind"] == "mdp-study", "study kind")
    ok(doc["env"] == "tamarisk", "env echoed")
    ok(len(doc["records"]) == 10, "5 methods x 2 sizes x 1 delta")
    for r in doc["records"]:
        ok(0.0 <= r["coverage"] <= 1.0, "coverage is a rate")
        ok(r["ci_lower"] <= r["coverage"] + 1e-12, "bound below coverage")
    cells = doc["failure_table"]["cells"]
    ok(sum(c["trials"] for c in cells) == 150,
       "failure cells partition the test set")
    for name in ("tamarisk-coverage.csv", "tamarisk-ci-lower.csv",
                 "tamarisk-width.csv", "tamarisk-width-by-t.csv",
                 "tamarisk-failure.csv"):
        ok(os.path.exists(os.path.join(out, name)), name + " written")


def main():
    with tempfile.TemporaryDirectory() as tmp:
        check_help_and_usage()
        check_simulate(tmp)
        check_battle_pipeline(tmp)
        check_quantile_experiment(tmp)
        check_gaussian_experiment(tmp)
        check_mdp_experiment(tmp)
    print("ok (%d checks)" % CHECKS)


if __name__ == "__main__":
    main()
