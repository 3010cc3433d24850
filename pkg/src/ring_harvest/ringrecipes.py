"""
Bundled scenario files that regenerate the published curves.

Each recipe is an ordinary scenario INI text; `ring-harvest reproduce <id>`
loads it exactly as a file on disk would be loaded.
"""
from __future__ import annotations

from ring_harvest.ringconfig import ScenarioConfig
from ring_harvest.ringmodel import ConfigError

FIGURE_RECIPES: dict[str, str] = {
    "fig1c": """
[scenario]
name = fig1c
analysis = transport

[geometry]
kind = ring_chain
rings = 10
d = 0.05
d_r_ratio = 0.9

[physics]
delta = 0
gamma_t = 2
horizon = 150

[sweep]
geometry.n_r = 3..12
""",
    "fig2a": """
[scenario]
name = fig2a
analysis = bands

[geometry]
kind = ring_chain
n_r = 9
rings = 10
d = 0.05
d_r_ratio = 0.9
donor_acceptor = false
""",
    "fig2b": """
[scenario]
name = fig2b
analysis = bands

[geometry]
kind = ring_chain
n_r = 9
rings = 10
d = 0.05
donor_acceptor = false

[sweep]
geometry.d_r_ratio = linspace(0.3, 1.5, 25)
""",
    "fig2c": """
[scenario]
name = fig2c
analysis = edges

[geometry]
kind = ring_chain
n_r = 9
rings = 10
d = 0.05
donor_acceptor = false

[sweep]
geometry.d_r_ratio = linspace(0.3, 1.5, 25)
""",
    "fig2e": """
[scenario]
name = fig2e
analysis = transport

[geometry]
kind = ring_chain
n_r = 9
rings = 10
d = 0.05

[physics]
delta = optimize
gamma_t = 1
horizon = 150

[sweep]
geometry.d_r_ratio = linspace(0.3, 1.5, 25)
""",
    "fig2f": """
[scenario]
name = fig2f
analysis = transport

[geometry]
kind = ring_chain
n_r = 9
rings = 10
d = 0.05
d_r_ratio = 0.9

[physics]
delta = 0
gamma_t = 1
horizon = 150
track_edge_states = true

[output]
plot = true
""",
    "fig3": """
[scenario]
name = fig3
analysis = transport

[geometry]
kind = ring_chain
rings = 10
d = 0.05
d_r_ratio = 0.9

[physics]
gamma_t = 2
horizon = 150

[sweep]
geometry.n_r = 3..12
physics.delta = linspace(-15, 15, 31)
""",
    # Donor and acceptor sit about one wavelength apart in every panel.
    "fig4a": """
[scenario]
name = fig4a
analysis = transport

[geometry]
kind = hexagonal
rows = 5
columns = 20
d = 0.06

[physics]
delta = 0
horizon = 150

[disorder]
type = frequency
sigma_over_j = 0.25
realizations = 25
seed = 0

[sweep]
physics.gamma_t_over_j = logspace(-2, 0.5, 11)
""",
    "fig4b": """
[scenario]
name = fig4b
analysis = transport

[geometry]
kind = honeycomb
rows = 5
columns = 13
d = 0.06

[physics]
delta = 4.5
horizon = 150

[disorder]
type = frequency
sigma_over_j = 0.25
realizations = 25
seed = 0

[sweep]
physics.gamma_t_over_j = logspace(-2, 0.5, 11)
""",
    # Caption value of the detuning; the running text quotes +1 instead.
    "fig4c": """
[scenario]
name = fig4c
analysis = transport

[geometry]
kind = ring_chain
n_r = 9
rings = 5
d = 0.06
d_r_ratio = 0.9

[physics]
delta = -1
horizon = 150

[disorder]
type = frequency
sigma_over_j = 0.25
realizations = 25
seed = 0

[sweep]
physics.gamma_t_over_j = logspace(-2, 0, 9)
""",
    "fig5b": """
[scenario]
name = fig5b
analysis = steady

[geometry]
kind = honeycomb
rows = 5
columns = 13
d = 0.06

[physics]
delta = -20
omega0 = 0.001
waist = 0.3
gamma_t_over_j_grid = logspace(-2, 1, 13)
""",
    "fig5d": """
[scenario]
name = fig5d
analysis = steady

[geometry]
kind = ring_lattice_hexagonal
n_r = 9
rows = 3
columns = 3
d = 0.06
d_r_ratio = 0.9

[physics]
delta = -4.63
omega0 = 0.001
waist = 0.3
gamma_t_over_j_grid = logspace(-2, 1, 13)
""",
    "figm1": """
[scenario]
name = figm1
analysis = trap_optimum

[geometry]
kind = ring_chain
rings = 10
radius = 0.08
d_r_ratio = parity

[physics]
delta = 0
horizon = 150
gamma_t_grid = logspace(-2, 1, 16)

[sweep]
geometry.n_r = 8..10
""",
    "figm2": """
[scenario]
name = figm2
analysis = transport

[geometry]
kind = ring_chain
rings = 10
radius = 0.08
d_r_ratio = parity

[physics]
delta = optimize
horizon = 150

[sweep]
geometry.n_r = 3..12
physics.gamma_t = logspace(-2, 1, 13)
""",
    "figm3": """
[scenario]
name = figm3
analysis = edges

[geometry]
kind = ring_lattice_square
n_r = 8
rows = 3
columns = 3
d = 0.05
donor_acceptor = false

[sweep]
geometry.d_r_ratio = linspace(0.4, 1.5, 12)
""",
    "fig2b_n8": """
[scenario]
name = fig2b_n8
analysis = bands

[geometry]
kind = ring_chain
n_r = 8
rings = 10
d = 0.05
donor_acceptor = false

[sweep]
geometry.d_r_ratio = linspace(0.3, 1.5, 25)
""",
    "fig2b_rotated": """
[scenario]
name = fig2b_rotated
analysis = bands

[geometry]
kind = ring_chain
rings = 10
d = 0.05
donor_acceptor = false

[disorder]
type = rotation
realizations = 50
seed = 0

[sweep]
geometry.n_r = 6..9
geometry.d_r_ratio = linspace(0.3, 1.5, 13)
""",
    "fig2c_n8": """
[scenario]
name = fig2c_n8
analysis = edges

[geometry]
kind = ring_chain
n_r = 8
rings = 10
d = 0.05
donor_acceptor = false

[sweep]
geometry.d_r_ratio = linspace(0.3, 1.5, 25)
""",
    "fig2e_n8": """
[scenario]
name = fig2e_n8
analysis = transport

[geometry]
kind = ring_chain
n_r = 8
rings = 10
d = 0.05

[physics]
delta = optimize
gamma_t = 1
horizon = 150

[sweep]
geometry.d_r_ratio = linspace(0.3, 1.5, 25)
""",
    "fig4a_chain": """
[scenario]
name = fig4a_chain
analysis = transport

[geometry]
kind = linear_chain
sites = 20
d = 0.06

[physics]
delta = 0
horizon = 150

[disorder]
type = frequency
sigma_over_j = 0.25
realizations = 25
seed = 0

[sweep]
physics.gamma_t_over_j = logspace(-2, 0.5, 11)
""",
    "fig4a_pair": """
[scenario]
name = fig4a_pair
analysis = transport

[geometry]
kind = free_pair
d = 0.06

[physics]
delta = 0
horizon = 150

[sweep]
physics.gamma_t_over_j = logspace(-2, 0.5, 11)
""",
    "fig4a_strong": """
[scenario]
name = fig4a_strong
analysis = transport

[geometry]
kind = hexagonal
rows = 5
columns = 20
d = 0.06

[physics]
delta = 0
horizon = 150

[disorder]
type = frequency
sigma_over_j = 0.5
realizations = 25
seed = 0

[sweep]
physics.gamma_t_over_j = logspace(-2, 0.5, 11)
""",
    # Detuning of the same lattice in the steady-state comparison.
    "fig4c_lattice": """
[scenario]
name = fig4c_lattice
analysis = transport

[geometry]
kind = ring_lattice_hexagonal
n_r = 9
rows = 3
columns = 3
d = 0.06
d_r_ratio = 0.9

[physics]
delta = -4.63
horizon = 150

[disorder]
type = frequency
sigma_over_j = 0.25
realizations = 25
seed = 0

[sweep]
physics.gamma_t_over_j = logspace(-2, 0, 9)
""",
    # 20 columns put donor and acceptor about one wavelength apart.
    "fig5a": """
[scenario]
name = fig5a
analysis = steady

[geometry]
kind = hexagonal
rows = 5
columns = 20
d = 0.06

[physics]
delta = -18
omega0 = 0.001
waist = 0.3
gamma_t_over_j_grid = logspace(-2, 1, 13)
""",
    "fig5a_chain": """
[scenario]
name = fig5a_chain
analysis = steady

[geometry]
kind = linear_chain
sites = 20
d = 0.06

[physics]
delta = 0
omega0 = 0.001
waist = 0.3
gamma_t_over_j_grid = logspace(-2, 1, 13)
""",
    "fig5a_w3": """
[scenario]
name = fig5a_w3
analysis = steady

[geometry]
kind = hexagonal
rows = 5
columns = 20
d = 0.06

[physics]
delta = -18
omega0 = 0.001
waist = 3
gamma_t_over_j_grid = logspace(-2, 1, 13)
""",
    "fig5b_w3": """
[scenario]
name = fig5b_w3
analysis = steady

[geometry]
kind = honeycomb
rows = 5
columns = 13
d = 0.06

[physics]
delta = -20
omega0 = 0.001
waist = 3
gamma_t_over_j_grid = logspace(-2, 1, 13)
""",
    "fig5c": """
[scenario]
name = fig5c
analysis = steady

[geometry]
kind = ring_chain
n_r = 9
rings = 5
d = 0.06
d_r_ratio = 0.9

[physics]
delta = -3.85
omega0 = 0.001
waist = 0.3
gamma_t_over_j_grid = logspace(-2, 1, 13)
""",
    "fig5d_w3": """
[scenario]
name = fig5d_w3
analysis = steady

[geometry]
kind = ring_lattice_hexagonal
n_r = 9
rows = 3
columns = 3
d = 0.06
d_r_ratio = 0.9

[physics]
delta = -4.63
omega0 = 0.001
waist = 3
gamma_t_over_j_grid = logspace(-2, 1, 13)
""",
}


def recipe_config(figure_id: str) -> ScenarioConfig:
    """Return the validated scenario of a bundled figure recipe."""
    try:
        text = FIGURE_RECIPES[figure_id]
    except KeyError:
        known = ", ".join(sorted(FIGURE_RECIPES))
        raise ConfigError(f"Unknown figure '{figure_id}'; known: {known}") from None
    return ScenarioConfig.from_string(text, f"recipe:{figure_id}")
