//! Generated matplotlib scripts. They only read the CSV files written next
//! to them, so figures can be regenerated without rerunning anything.

use std::path::Path;

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Relative error against `N`, one uniform and one refined curve per `k`.
pub fn sweep_script(csv: &Path, function: &str) -> String {
    let csv = file_name(csv);
    format!(
        r#"import csv, os
from collections import defaultdict
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = list(csv.DictReader(open(os.path.join(here, "{csv}"))))
by_k = defaultdict(list)
for r in rows:
    by_k[int(r["k"])].append(r)
fig, ax = plt.subplots(figsize=(7, 4))
for k, rs in sorted(by_k.items()):
    n = [int(r["n"]) for r in rs]
    ax.plot(n, [float(r["rel_err_refined_pct"]) for r in rs], label=f"refined k={{k}}")
uniform = sorted({{int(r["n"]): float(r["rel_err_uniform_pct"]) for r in rows}}.items())
ax.plot([u[0] for u in uniform], [u[1] for u in uniform], "k--", label="uniform")
ax.set_yscale("log")
ax.set_xlabel("N")
ax.set_ylabel("relative error (%)")
ax.set_title("{function}")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "{function}_sweep.png"), dpi=150)
"#
    )
}

/// Test-error curves from every trace, plus error heatmaps for 2D runs.
pub fn pinn_script(problem: &str, two_d: bool) -> String {
    let mut s = format!(
        r#"import csv, glob, os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
fig, ax = plt.subplots(figsize=(7, 4))
for path in sorted(glob.glob(os.path.join(here, "trace_{problem}_*.csv"))):
    rows = list(csv.DictReader(open(path)))
    label = os.path.basename(path)[len("trace_{problem}_"):-4]
    ax.plot([int(r["epoch"]) for r in rows], [float(r["l2_test_error"]) for r in rows], label=label)
ax.set_yscale("log")
ax.set_xlabel("epoch")
ax.set_ylabel("L2 test error")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(here, "{problem}_l2.png"), dpi=150)
"#
    );
    if two_d {
        s.push_str(&format!(
            r#"
import numpy as np
paths = sorted(glob.glob(os.path.join(here, "error_field_{problem}_*.csv")))
if paths:
    fig, axes = plt.subplots(1, len(paths), figsize=(3 * len(paths), 3), squeeze=False)
    for ax, path in zip(axes[0], paths):
        rows = list(csv.DictReader(open(path)))
        x = np.array([float(r["x"]) for r in rows])
        y = np.array([float(r["y"]) for r in rows])
        e = np.array([float(r["squared_error"]) for r in rows])
        m = int(round(len(rows) ** 0.5))
        ax.imshow(e.reshape(m, m).T, origin="lower", extent=(x.min(), x.max(), y.min(), y.max()))
        ax.set_title(os.path.basename(path)[len("error_field_{problem}_"):-4], fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(here, "{problem}_error_fields.png"), dpi=150)
"#
        ));
    }
    s
}
