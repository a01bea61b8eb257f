#!/usr/bin/env python3
"""Convert a LINQS-format dataset (<name>.content) into features.tsv and labels.tsv.

Nodes keep the file's row order; class ids follow the sorted class names.
No split is written: generate one with `glam make-split`.

    python3 contrib/convert_linqs.py <content_file> <out_dir>
"""
import os
import sys


def main():
    content, out_dir = sys.argv[1:3]
    rows = []
    with open(content) as f:
        for line in f:
            parts = line.split()
            if parts:
                rows.append((parts[1:-1], parts[-1]))
    classes = sorted({label for _, label in rows})
    class_id = {c: i for i, c in enumerate(classes)}
    n, d = len(rows), len(rows[0][0])
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "features.tsv"), "w") as f:
        f.write(f"# converted from {os.path.basename(content)}\n{n} {d}\n")
        for i, (values, _) in enumerate(rows):
            for j, v in enumerate(values):
                if float(v) != 0.0:
                    f.write(f"{i} {j} {v}\n")
    with open(os.path.join(out_dir, "labels.tsv"), "w") as f:
        f.write("# classes: " + " ".join(classes) + f"\n{len(classes)}\n")
        for i, (_, label) in enumerate(rows):
            f.write(f"{i} {class_id[label]}\n")


if __name__ == "__main__":
    main()
