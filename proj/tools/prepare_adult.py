#!/usr/bin/env python3
"""Split the UCI Adult census file into source (income <=50K) and target
(income >50K) tables plus a feature schema for gse.

    python3 tools/prepare_adult.py adult.data data/adult
"""
import argparse
import csv
import json
import os

COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num", "marital_status",
    "occupation", "relationship", "race", "sex", "capital_gain", "capital_loss",
    "hours_per_week", "native_country", "income",
]

SCHEMA = {
    "features": [
        {"name": "age", "kind": "integer", "actionable": False},
        {"name": "education_num", "kind": "integer"},
        {"name": "hours_per_week", "kind": "integer"},
        {"name": "capital_gain", "kind": "real"},
        {"name": "capital_loss", "kind": "real"},
        {"name": "workclass", "kind": "categorical",
         "categories": ["Private", "Self-emp", "Government", "Other"]},
        {"name": "sex", "kind": "boolean", "actionable": False},
    ]
}


def workclass(value):
    if value == "Private":
        return "Private"
    if value.startswith("Self-emp"):
        return "Self-emp"
    if value.endswith("-gov"):
        return "Government"
    return "Other"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("adult_csv")
    parser.add_argument("out_dir")
    args = parser.parse_args()

    low, high = [], []
    with open(args.adult_csv, newline="") as f:
        for raw in csv.reader(f, skipinitialspace=True):
            if len(raw) != len(COLUMNS) or "?" in raw:
                continue
            r = dict(zip(COLUMNS, raw))
            row = [r["age"], r["education_num"], r["hours_per_week"], r["capital_gain"],
                   r["capital_loss"], workclass(r["workclass"]), "1" if r["sex"] == "Male" else "0"]
            (high if r["income"].startswith(">50K") else low).append(row)

    # Balanced: keep the first len(high) low-income rows.
    low = low[: len(high)]
    os.makedirs(args.out_dir, exist_ok=True)
    header = [f["name"] for f in SCHEMA["features"]]
    for name, rows in (("source.csv", low), ("target.csv", high)):
        with open(os.path.join(args.out_dir, name), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            w.writerows(rows)
    with open(os.path.join(args.out_dir, "schema.json"), "w") as f:
        json.dump(SCHEMA, f, indent=2)
    print(f"wrote {len(low)} source and {len(high)} target rows to {args.out_dir}")


if __name__ == "__main__":
    main()
