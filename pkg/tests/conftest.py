import numpy as np
import pytest

from Scripts.modelo_red_tsch import build_network, chain_network, conflict_sets, star_network


@pytest.fixture
def enlace_aislado():
    net = build_network(2, 1, {1: [0]}, {0: [1], 1: [0]})
    return net, conflict_sets(net)


@pytest.fixture
def par_primario():
    """Dos enlaces hacia el mismo receptor de un solo canal."""
    net = build_network(3, 1, {1: [0], 2: [0]}, {0: [1, 2], 1: [0], 2: [0]})
    return net, conflict_sets(net)


@pytest.fixture
def par_independiente():
    net = build_network(4, 1, {1: [0], 3: [2]}, {0: [1], 1: [0], 2: [3], 3: [2]})
    return net, conflict_sets(net)


@pytest.fixture
def tres_secundarios():
    """El enlace (1,0) choca por canal con (3,2) y (5,4), que no chocan entre sí."""
    net = build_network(
        6,
        1,
        {1: [0], 3: [2], 5: [4]},
        {0: [1, 3, 5], 1: [0], 2: [3], 3: [0, 2], 4: [5], 5: [0, 4]},
    )
    return net, conflict_sets(net)


@pytest.fixture
def arbol_seis():
    """Árbol de 6 nodos (5 enlaces) con interferencia extra entre ramas."""
    relevos = {1: [0], 2: [0], 3: [1], 4: [2], 5: [3]}
    interferencia = {
        0: [1, 2],
        1: [0, 2, 3],
        2: [0, 1, 4],
        3: [1, 4, 5],
        4: [2, 3, 5],
        5: [3, 4],
    }
    net = build_network(6, 2, relevos, interferencia)
    return net, conflict_sets(net)


@pytest.fixture
def estrella_86():
    net = star_network(86, 15)
    return net, conflict_sets(net)


@pytest.fixture
def cadena_cinco():
    net = chain_network(5, 2)
    return net, conflict_sets(net)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
