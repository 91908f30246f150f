import networkx as nx
import numpy as np
import pytest

from Scripts.errores import ErrorTopologia
from Scripts.modelo_red_tsch import (
    build_network,
    chain_network,
    conflict_graph,
    conflict_sets,
    primary_conflicts,
    random_network,
    secondary_conflicts,
    star_channels,
    star_network,
)
from Scripts.validacion import conflictos_por_definicion


def test_enlaces_en_orden_creciente():
    net = build_network(4, 2, {3: [1, 0], 1: [0], 2: [1]}, {0: [1, 3], 1: [0, 2, 3], 2: [1], 3: [0, 1]})
    assert net.links == ((1, 0), (2, 1), (3, 0), (3, 1))
    assert net.link_index(3, 0) == 2
    assert net.link_count == 4


def test_acepta_listas_por_nodo():
    net = build_network(2, 1, [[], [0]], [[1], [0]])
    assert net.links == ((1, 0),)


@pytest.mark.parametrize(
    "relevos, interferencia, mensaje",
    [
        ({0: [0]}, {0: [1], 1: [0]}, "propio relevo"),
        ({1: [0]}, {0: [], 1: []}, "fuera de su rango"),
        ({1: [0]}, {0: [1], 1: [0, 1]}, "propio rango"),
        ({}, {0: [1], 1: []}, "asimétrica"),
        ({1: [5]}, {0: [1], 1: [0]}, "inexistentes"),
    ],
)
def test_topologias_invalidas(relevos, interferencia, mensaje):
    with pytest.raises(ErrorTopologia, match=mensaje):
        build_network(2, 1, relevos, interferencia)


@pytest.mark.parametrize("nodos, canales", [(0, 1), (2, 0), (2.5, 1)])
def test_dimensiones_invalidas(nodos, canales):
    with pytest.raises(ErrorTopologia):
        build_network(nodos, canales, {}, {})


def test_enlace_inexistente():
    net = star_network(3, 2)
    with pytest.raises(ErrorTopologia):
        net.link_index(0, 1)
    with pytest.raises(ErrorTopologia):
        primary_conflicts(net, 7)


def test_par_primario(par_primario):
    net, conflicts = par_primario
    assert primary_conflicts(net, 0, conflicts) == {1}
    assert secondary_conflicts(net, 0, conflicts) == frozenset()
    assert star_channels(net, conflicts) == 1


def test_estrella_multicanal_es_solo_secundaria():
    net = star_network(5, 3)
    conflicts = conflict_sets(net)
    assert not conflicts.primaria.any()
    for i in range(net.link_count):
        assert conflicts.secondary_only[i] == frozenset(range(5)) - {i}
    assert star_channels(net, conflicts) == 3


@pytest.mark.parametrize("N", range(1, 9))
def test_estrella_sin_sumidero_multicanal_es_primaria(N):
    net = star_network(N, 3, multichannel_sink=False)
    conflicts = conflict_sets(net)
    for i in range(N):
        assert conflicts.primary[i] == frozenset(range(N)) - {i}
        assert conflicts.secondary_only[i] == frozenset()
    assert not conflicts.secundaria.any()
    if N > 1:
        assert star_channels(net, conflicts) == 1


def test_cadena_mezcla_primarios_y_secundarios():
    net = chain_network(4, 2)
    conflicts = conflict_sets(net)
    assert net.links == ((1, 0), (2, 1), (3, 2))
    assert conflicts.primary[1] == {0, 2}
    # el receptor 2 de (3,2) está en el rango de 1, transmisor de (1,0)
    assert conflicts.secondary_only[0] == {2}
    assert conflicts.secondary_only[2] == {0}
    assert star_channels(net, conflicts) is None


def test_tres_secundarios(tres_secundarios):
    net, conflicts = tres_secundarios
    assert conflicts.secondary_only == (frozenset({1, 2}), frozenset({0}), frozenset({0}))
    assert conflicts.full(0) == {1, 2}


@pytest.mark.parametrize("semilla", range(8))
def test_conflictos_coinciden_con_la_definicion(semilla):
    net = random_network(9, 2, 0.45, semilla, multichannel_sink=semilla % 2 == 0)
    conflicts = conflict_sets(net)
    primarios, secundarios = conflictos_por_definicion(net)
    assert conflicts.primary == primarios
    assert conflicts.secondary_only == secundarios
    assert np.array_equal(conflicts.primaria, conflicts.primaria.T)
    assert np.array_equal(conflicts.secundaria, conflicts.secundaria.T)
    assert not (conflicts.primaria & conflicts.secundaria).any()


def test_red_aleatoria_reproducible_y_hacia_el_sumidero():
    a = random_network(12, 3, 0.4, 99)
    b = random_network(12, 3, 0.4, 99)
    assert a == b
    grafo = nx.Graph()
    grafo.add_edges_from(a.links)
    for n, m in a.links:
        assert nx.shortest_path_length(grafo, m, 0) < nx.shortest_path_length(grafo, n, 0)


def test_red_sin_enlaces():
    net = build_network(1, 1, {}, {})
    conflicts = conflict_sets(net)
    assert net.link_count == 0
    assert conflicts.primaria.shape == (0, 0)
    assert star_channels(net, conflicts) is None


def test_grafo_de_conflictos():
    net = chain_network(4, 2)
    grafo = conflict_graph(net, conflict_sets(net))
    assert grafo.number_of_nodes() == 3
    assert grafo.edges[0, 1]["tipo"] == "primario"
    assert grafo.edges[0, 2]["tipo"] == "secundario"
    assert grafo.nodes[2]["origen"] == 3
