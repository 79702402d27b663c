#!/usr/bin/env python3
"""Prepare the IWPC Warfarin dataset for the replay harness.

Input: the IWPC clinical dataset exported as CSV (from
iwpc_data_7_3_09_revised.xls, sheet "Subject Data", available at
https://www.pharmgkb.org/downloads after registration).

Output: a headered CSV of numeric features plus a `dose_class` label column:
  0  low     (< 21 mg/week)
  1  medium  (21-49 mg/week)
  2  high    (> 49 mg/week)

Rows without a therapeutic dose are dropped. Demographics and genotype
columns are one-hot encoded (missing values get their own indicator), and
the remaining numeric columns are kept as-is with blanks left empty for the
loader's column-mean imputation. The published dimensionality (5528 rows,
93 features) depends on the exact source-file revision; the loader does not
enforce it.

Usage: prepare_warfarin.py <iwpc_export.csv> <output.csv>
"""

import csv
import sys

DOSE_COL = "Therapeutic Dose of Warfarin"

CATEGORICAL = [
    "Gender",
    "Race (Reported)",
    "Race (OMB)",
    "Ethnicity (Reported)",
    "Ethnicity (OMB)",
    "Age",
    "Indication for Warfarin Treatment",
    "Diabetes",
    "Congestive Heart Failure and/or Cardiomyopathy",
    "Valve Replacement",
    "Aspirin",
    "Acetaminophen or Paracetamol (Tylenol)",
    "Simvastatin (Zocor)",
    "Atorvastatin (Lipitor)",
    "Fluvastatin (Lescol)",
    "Lovastatin (Mevacor)",
    "Pravastatin (Pravachol)",
    "Rosuvastatin (Crestor)",
    "Amiodarone (Cordarone)",
    "Carbamazepine (Tegretol)",
    "Phenytoin (Dilantin)",
    "Rifampin or Rifampicin",
    "Current Smoker",
    "CYP2C9 consensus",
    "VKORC1 -1639 consensus",
    "VKORC1 1173 consensus",
    "VKORC1 1542 consensus",
    "VKORC1 3730 consensus",
    "VKORC1 2255 consensus",
    "VKORC1 -4451 consensus",
]

NUMERIC = [
    "Height (cm)",
    "Weight (kg)",
    "INR on Reported Therapeutic Dose of Warfarin",
    "Target INR",
]


def dose_class(value: str):
    try:
        dose = float(value)
    except (TypeError, ValueError):
        return None
    if dose < 21.0:
        return 0
    if dose <= 49.0:
        return 1
    return 2


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__)
        return 2
    src, dst = sys.argv[1], sys.argv[2]

    with open(src, newline="", encoding="utf-8", errors="replace") as fh:
        reader = csv.DictReader(fh)
        rows = [r for r in reader if dose_class(r.get(DOSE_COL, "")) is not None]
    if not rows:
        print(f"no usable rows in {src}; is {DOSE_COL!r} present?")
        return 1

    present_cat = [c for c in CATEGORICAL if c in rows[0]]
    present_num = [c for c in NUMERIC if c in rows[0]]
    skipped = [c for c in CATEGORICAL + NUMERIC if c not in rows[0]]
    if skipped:
        print(f"note: {len(skipped)} expected columns absent in this revision: {skipped}")

    # stable one-hot vocabulary per categorical column
    vocab = {}
    for col in present_cat:
        values = []
        for r in rows:
            v = (r.get(col) or "").strip() or "NA"
            if v not in values:
                values.append(v)
        vocab[col] = values

    header = []
    for col in present_cat:
        header.extend(f"{col}={v}" for v in vocab[col])
    header.extend(present_num)
    header.append("dose_class")

    with open(dst, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in rows:
            out = []
            for col in present_cat:
                v = (r.get(col) or "").strip() or "NA"
                out.extend("1" if v == u else "0" for u in vocab[col])
            for col in present_num:
                v = (r.get(col) or "").strip()
                try:
                    out.append(str(float(v)))
                except ValueError:
                    out.append("")  # loader imputes with the column mean
            out.append(str(dose_class(r[DOSE_COL])))
            writer.writerow(out)

    features = len(header) - 1
    print(f"wrote {dst}: {len(rows)} rows, {features} features, 3 classes")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
