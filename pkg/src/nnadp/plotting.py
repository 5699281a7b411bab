"""Static SVG figures of closed-loop trajectories."""

import numpy as np

from .geometry import enumerate_vertices


def _outline(ax, P, **kw):
    V = enumerate_vertices(P).vertices
    if len(V) == 1:
        ax.plot(V[:, 0], V[:, 1], "o", **kw)
        return
    V = np.vstack([V, V[:1]])
    ax.plot(V[:, 0], V[:, 1], **kw)


def plot_trajectories(trajectories, sets, path):
    """State panel over X and X_0, input panel over U.

    ``trajectories`` maps a label to a :class:`Trajectory`. Only planar
    states and inputs are drawn.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_x, ax_u) = plt.subplots(1, 2, figsize=(10, 4.5))
    _outline(ax_x, sets.X, color="k", lw=1)
    _outline(ax_x, sets.sets[0], color="k", ls="--", lw=1, label="$X_0$")
    _outline(ax_u, sets.U, color="k", ls="--", lw=1, label="$U$")
    for label, traj in trajectories.items():
        ax_x.plot(traj.states[:, 0], traj.states[:, 1], ".-", label=label)
        ax_u.plot(traj.inputs[:, 0], traj.inputs[:, 1], ".-", label=label)
    for ax, name in ((ax_x, "x"), (ax_u, "u")):
        ax.set_xlabel(f"${name}_1$")
        ax.set_ylabel(f"${name}_2$")
        ax.set_aspect("equal")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
