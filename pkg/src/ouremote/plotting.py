"""Figure rendering for sweep results (matplotlib, file output only)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_sweep(rows, path, title=None):
    """MSE against the log-normal scale alpha, one curve per estimate.

    ``rows`` are dicts with the sweep CSV fields; rows whose status is not
    ``ok`` are skipped.
    """
    ok = [r for r in rows if r["status"] == "ok"]
    alpha = [r["alpha"] for r in ok]
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    curves = [
        ("mse_noise_sim", "ci_mse_noise_sim", "MSE with noise (simulated)", "o-"),
        ("mse_upper", "ci_mse_upper", "MSE with noise (upper bound)", "s--"),
        ("mse_no_noise", "ci_mse_no_noise", "MSE without noise", "^-"),
    ]
    for key, ci, label, style in curves:
        ax.errorbar(alpha, [r[key] for r in ok], yerr=[r[ci] for r in ok], fmt=style,
                    capsize=3, label=label)
    ax.plot(alpha, [r["mse_lower"] for r in ok], ":", color="gray", label="lower bound mse_Y")
    ax.set_xlabel(r"log-normal scale $\alpha$")
    ax.set_ylabel("MSE")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    # fixed metadata keeps the file reproducible
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
