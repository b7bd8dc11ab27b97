"""Regenerate the bundled CSV snapshots under src/reallogic/data."""

from pathlib import Path

from reallogic import datasets

OUT = Path(__file__).parent.parent / "src" / "reallogic" / "data"

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    for make, name in ((datasets.make_iris_like, "iris_like.csv"),
                       (datasets.make_crabs_like, "crabs_like.csv"),
                       (datasets.make_real_estate_like, "real_estate_like.csv")):
        ds = make()
        datasets.write_csv(ds, OUT / name)
        print(f"{name}: {len(ds)} rows, {len(ds.columns)} columns")
