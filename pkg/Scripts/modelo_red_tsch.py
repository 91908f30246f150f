# 📦 Modelo de red TSCH: nodos, enlaces dirigidos y conjuntos de conflicto
#
# Un enlace (n, m) existe si m es relevo permitido de n. Dos enlaces están en
# conflicto primario si comparten un extremo (no pueden transmitir en la misma
# ranura en ningún canal) y en conflicto secundario si el receptor de uno está
# en el rango de interferencia del transmisor del otro (sólo chocan si eligen
# el mismo canal).
import logging
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np

from Scripts.errores import ErrorTopologia

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NetworkModel:
    node_count: int
    channel_count: int
    relay_sets: tuple
    interference_sets: tuple
    links: tuple
    multichannel_sinks: frozenset = field(default_factory=frozenset)

    @property
    def link_count(self):
        return len(self.links)

    @cached_property
    def _indice_por_enlace(self):
        return {enlace: i for i, enlace in enumerate(self.links)}

    def link_index(self, origen, destino):
        try:
            return self._indice_por_enlace[(origen, destino)]
        except KeyError:
            raise ErrorTopologia(f"El enlace ({origen}, {destino}) no existe en la red.") from None

    @cached_property
    def origenes(self):
        return np.array([n for n, _ in self.links], dtype=np.int64)

    @cached_property
    def destinos(self):
        return np.array([m for _, m in self.links], dtype=np.int64)

    @cached_property
    def matriz_interferencia(self):
        matriz = np.zeros((self.node_count, self.node_count), dtype=bool)
        for n, vecinos in enumerate(self.interference_sets):
            for k in vecinos:
                matriz[n, k] = True
        return matriz


@dataclass(frozen=True)
class ConflictSets:
    primary: tuple
    secondary_only: tuple
    primaria: np.ndarray = field(repr=False, compare=False)
    secundaria: np.ndarray = field(repr=False, compare=False)

    def full(self, enlace):
        """𝓘ˢ completo del enlace: primarios más sólo-secundarios."""
        return self.primary[enlace] | self.secondary_only[enlace]

    @cached_property
    def matriz_total(self):
        return self.primaria | self.secundaria


def build_network(node_count, channel_count, relay_sets, interference_sets, multichannel_sinks=()):
    """Valida la topología declarada y enumera 𝒮 en orden (n, m) creciente.

    `relay_sets` e `interference_sets` pueden ser listas indexadas por nodo o
    diccionarios {nodo: iterable}; los nodos ausentes quedan con conjunto vacío.
    """
    if int(node_count) != node_count or node_count < 1:
        raise ErrorTopologia(f"node_count debe ser un entero ≥ 1 (recibido {node_count}).")
    if int(channel_count) != channel_count or channel_count < 1:
        raise ErrorTopologia(f"channel_count debe ser un entero ≥ 1 (recibido {channel_count}).")
    node_count = int(node_count)

    relevos = _normalizar_conjuntos(relay_sets, node_count, "relay_sets")
    interferencia = _normalizar_conjuntos(interference_sets, node_count, "interference_sets")

    for n in range(node_count):
        if n in relevos[n]:
            raise ErrorTopologia(f"El nodo {n} no puede ser su propio relevo.")
        if n in interferencia[n]:
            raise ErrorTopologia(f"El nodo {n} figura en su propio rango de interferencia.")
        fuera = relevos[n] - interferencia[n]
        if fuera:
            raise ErrorTopologia(
                f"Relevos {sorted(fuera)} del nodo {n} fuera de su rango de interferencia (𝒟ₙ ⊄ 𝒩ₙ)."
            )
        for k in interferencia[n]:
            if n not in interferencia[k]:
                raise ErrorTopologia(f"Interferencia asimétrica: {k} ∈ 𝒩_{n} pero {n} ∉ 𝒩_{k}.")

    sumideros = frozenset(int(s) for s in multichannel_sinks)
    for s in sumideros:
        if not 0 <= s < node_count:
            raise ErrorTopologia(f"Sumidero multicanal {s} fuera de rango [0, {node_count}).")

    enlaces = tuple((n, m) for n in range(node_count) for m in sorted(relevos[n]))
    return NetworkModel(
        node_count=node_count,
        channel_count=int(channel_count),
        relay_sets=tuple(relevos),
        interference_sets=tuple(interferencia),
        links=enlaces,
        multichannel_sinks=sumideros,
    )


def _normalizar_conjuntos(conjuntos, node_count, nombre):
    if isinstance(conjuntos, dict):
        claves_malas = [k for k in conjuntos if not _es_nodo(k, node_count)]
        if claves_malas:
            raise ErrorTopologia(f"{nombre}: nodos inexistentes {claves_malas}.")
        crudo = [conjuntos.get(n, ()) for n in range(node_count)]
    else:
        crudo = list(conjuntos)
        if len(crudo) != node_count:
            raise ErrorTopologia(f"{nombre}: se esperaban {node_count} conjuntos, llegaron {len(crudo)}.")
    resultado = []
    for n, miembros in enumerate(crudo):
        miembros = frozenset(int(k) for k in (miembros or ()))
        malos = [k for k in miembros if not _es_nodo(k, node_count)]
        if malos:
            raise ErrorTopologia(f"{nombre}[{n}]: nodos inexistentes {sorted(malos)}.")
        resultado.append(miembros)
    return resultado


def _es_nodo(valor, node_count):
    try:
        return 0 <= int(valor) < node_count and int(valor) == valor
    except (TypeError, ValueError):
        return False


def _verificar_indice(net, link):
    if not 0 <= link < net.link_count:
        raise ErrorTopologia(f"Índice de enlace {link} fuera de rango [0, {net.link_count}).")


def conflict_sets(net):
    """Calcula las matrices de conflicto primario y sólo-secundario (S×S)."""
    origen, destino = net.origenes, net.destinos
    S = net.link_count

    comparte = (
        (origen[:, None] == origen[None, :])
        | (origen[:, None] == destino[None, :])
        | (destino[:, None] == origen[None, :])
        | (destino[:, None] == destino[None, :])
    )
    if net.multichannel_sinks:
        # el receptor multicanal acepta tramas simultáneas en canales distintos
        sumidero = np.isin(destino, list(net.multichannel_sinks))
        mismo_receptor = (destino[:, None] == destino[None, :]) & sumidero[:, None]
        solo_receptor = mismo_receptor & (origen[:, None] != origen[None, :])
        comparte &= ~solo_receptor
    diagonal = np.eye(S, dtype=bool)
    primaria = comparte & ~diagonal

    N_int = net.matriz_interferencia
    # (l,k) interfiere con (n,m) si m ∈ 𝒩_l o k ∈ 𝒩_n
    secundaria = N_int[origen[None, :], destino[:, None]] | N_int[origen[:, None], destino[None, :]]
    secundaria = secundaria & ~primaria & ~diagonal

    primary = tuple(frozenset(np.flatnonzero(fila).tolist()) for fila in primaria)
    secondary_only = tuple(frozenset(np.flatnonzero(fila).tolist()) for fila in secundaria)
    return ConflictSets(primary=primary, secondary_only=secondary_only, primaria=primaria, secundaria=secundaria)


def primary_conflicts(net, link, conflicts=None):
    _verificar_indice(net, link)
    conflicts = conflicts if conflicts is not None else conflict_sets(net)
    return conflicts.primary[link]


def secondary_conflicts(net, link, conflicts=None):
    _verificar_indice(net, link)
    conflicts = conflicts if conflicts is not None else conflict_sets(net)
    return conflicts.secondary_only[link]


def star_channels(net, conflicts):
    """Canales efectivos si la red es una estrella de recolección, o None.

    Estrella: todos los enlaces terminan en el mismo receptor y cada par está en
    conflicto. Si el conflicto es secundario (sumidero multicanal) el modelo de
    estrella usa M canales; si es primario se comporta como un único canal.
    """
    S = net.link_count
    if S == 0 or len(set(net.destinos.tolist())) != 1:
        return None
    fuera_diagonal = ~np.eye(S, dtype=bool)
    if np.all(conflicts.secundaria[fuera_diagonal]):
        return net.channel_count
    if np.all(conflicts.primaria[fuera_diagonal]):
        return 1
    return None


def conflict_graph(net, conflicts):
    grafo = nx.Graph()
    for i, (n, m) in enumerate(net.links):
        grafo.add_node(i, origen=n, destino=m)
    filas, columnas = np.nonzero(np.triu(conflicts.primaria))
    grafo.add_edges_from(zip(filas.tolist(), columnas.tolist()), tipo="primario")
    filas, columnas = np.nonzero(np.triu(conflicts.secundaria))
    grafo.add_edges_from(zip(filas.tolist(), columnas.tolist()), tipo="secundario")
    return grafo


# 🌐 Generadores de topología (declarativos, sin descubrimiento de rutas)

def star_network(N, M, multichannel_sink=True):
    """Sumidero 0 y hojas 1..N, todas en rango mutuo de interferencia."""
    nodos = N + 1
    relevos = {i: {0} for i in range(1, nodos)}
    interferencia = {n: set(range(nodos)) - {n} for n in range(nodos)}
    sumideros = (0,) if multichannel_sink else ()
    return build_network(nodos, M, relevos, interferencia, sumideros)


def chain_network(N, M):
    """Cadena 0 - 1 - ... - N-1; cada nodo reenvía a su vecino hacia el 0."""
    grafo = nx.path_graph(N)
    relevos = {n: {n - 1} for n in range(1, N)}
    interferencia = {n: set(grafo.neighbors(n)) for n in grafo.nodes}
    return build_network(N, M, relevos, interferencia)


def random_network(N, M, density, seed, multichannel_sink=False):
    """Grafo G(N, p) como interferencia; relevo = predecesor BFS hacia el nodo 0."""
    grafo = nx.gnp_random_graph(N, density, seed=seed)
    predecesores = dict(nx.bfs_predecessors(grafo, 0))
    relevos = {int(n): {int(padre)} for n, padre in predecesores.items()}
    interferencia = {n: set(grafo.neighbors(n)) for n in grafo.nodes}
    aislados = N - 1 - len(predecesores)
    if aislados:
        logger.warning(f"⚠️ {aislados} nodos sin camino al sumidero quedaron sin enlaces.")
    sumideros = (0,) if multichannel_sink else ()
    return build_network(N, M, relevos, interferencia, sumideros)
