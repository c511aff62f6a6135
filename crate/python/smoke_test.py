"""Smoke test for the crowdimpute extension module.

Build it first, e.g. `maturin develop -m crates/py/Cargo.toml`, then run
`python python/smoke_test.py`.
"""

import tempfile

import crowdimpute as ci


def main():
    data = ci.synth_fev(200, seed=3)
    assert data.n_rows == 200 and data.missing_count == 0, data
    amputed, truth = data.ampute("age", 8, seed=5)
    amputed, truth_g = amputed.ampute("gender", 6, seed=6)
    truth += truth_g
    assert amputed.missing_count == 14
    assert all(amputed.get(t["row"], t["column"]) is None for t in truth)

    summary = amputed.summary()
    assert "age" in {c["name"] for c in summary["columns"]}, summary.keys()

    assert ci.pool_point([1.0, 2.0, 4.5]) == 2.5
    cell = ci.summarize_cell([9.0, 10.0, 11.0, 12.0])
    assert cell["kind"] == "continuous" and cell["median"] == 10.5, cell
    votes = ci.summarize_cell(["male", "female", "male"], ["female", "male"])
    assert votes["winner"] == "male", votes

    machine = ci.multiple_impute(amputed, m=5, cycles=3, seed=2)
    assert machine.m == 5 and machine.provenance == "machine"
    assert len(machine.cells()) == 14
    assert machine.completed(0).missing_count == 0
    assert len(ci.pmm_impute_column(amputed, "age", seed=2)) == 8

    qns = ci.gen_survey(amputed, ["age", "gender"], k=5)
    assert sum(len(q["questions"]) for q in qns) == 14
    judgments = ci.simulate_crowd(amputed, qns, persona="experienced", seed=4)
    crowd = ci.crowd_imputations(amputed, qns, judgments, 5)
    assert crowd.provenance == "crowd"

    report = ci.compare(truth, crowd, machine)
    assert 0.0 <= report.agreement_rate <= 1.0
    assert report.render("txt").startswith("Imputations for age")
    assert len(report.to_dict()["rows"]) == 14

    with tempfile.TemporaryDirectory() as tmp:
        machine.save(tmp + "/machine")
        again = ci.ImputationSet.load(tmp + "/machine")
        assert again.cells() == machine.cells()

        csv_path, schema_path = tmp + "/fev.csv", tmp + "/schema.json"
        with open(csv_path, "w") as f:
            f.write(data.to_csv())
        import json

        with open(schema_path, "w") as f:
            json.dump(data.schema(), f)
        result = ci.run_pipeline(
            {
                "dataset": csv_path,
                "schema": schema_path,
                "targets": ["age"],
                "n_missing": 5,
                "k": 4,
                "m": 4,
                "cycles": 2,
                "out_dir": tmp + "/run",
            }
        )
        assert len(result.to_dict()["rows"]) == 5

    try:
        ci.pool_point([])
    except ValueError:
        pass
    else:
        raise AssertionError("empty pool should raise")

    print("smoke test passed:", report.to_dict()["agreement"])


if __name__ == "__main__":
    main()
