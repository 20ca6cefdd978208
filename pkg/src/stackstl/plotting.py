"""Static SVG renderings of synthesized trajectories."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .dynamics import Scenario, Trajectory  # noqa: E402

_AGENT_COLORS = ["tab:blue", "tab:red", "tab:green", "tab:purple", "tab:brown"]


def _agents(scenario: Scenario) -> list[dict]:
    agents = scenario.plot.get("agents")
    if agents:
        return agents
    # workspace projection defaults to the first and third state for 4-state
    # double integrators, the first two states otherwise
    if scenario.n == 4:
        return [{"label": scenario.name, "x_index": 0, "y_index": 2}]
    return [{"label": scenario.name, "x_index": 0, "y_index": min(1, scenario.n - 1)}]


def plot_workspace(scenario: Scenario, traj: Trajectory, path, title: str = "",
                   annotate_every: int = 5):
    """Draw regions as rectangles and each agent's path as a polyline.

    Waypoints are labelled with their time step every ``annotate_every`` steps
    (and at the final step).
    """
    plt.rcParams["svg.hashsalt"] = "stackstl"
    fig, ax = plt.subplots(figsize=(6, 6))
    hints = scenario.plot
    for reg in hints.get("regions", []):
        (x0, x1), (y0, y1) = reg["x"], reg["y"]
        color = reg.get("color", "tab:gray")
        ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, facecolor=color, alpha=0.25,
                               edgecolor=color))
        ax.text((x0 + x1) / 2, (y0 + y1) / 2, reg["name"], ha="center", va="center", fontsize=9)

    x = traj.states.states
    T = x.shape[0]
    for i, ag in enumerate(_agents(scenario)):
        color = _AGENT_COLORS[i % len(_AGENT_COLORS)]
        px, py = x[:, ag["x_index"]], x[:, ag["y_index"]]
        ax.plot(px, py, "-o", color=color, markersize=3, linewidth=1.2, label=ag.get("label", f"agent {i + 1}"))
        for t in range(T):
            if t % annotate_every == 0 or t == T - 1:
                ax.annotate(str(t), (px[t], py[t]), textcoords="offset points", xytext=(3, 3),
                            fontsize=7, color=color)

    if "xlim" in hints:
        ax.set_xlim(*hints["xlim"])
    if "ylim" in hints:
        ax.set_ylim(*hints["ylim"])
    ax.set_aspect("equal", adjustable="box")
    ax.grid(True, linewidth=0.3)
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
