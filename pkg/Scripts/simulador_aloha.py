# 🎲 Simulador Monte Carlo de aloha ranurado multicanal sobre TSCH
#
# Modos:
#   saturado   -> cada enlace intenta con probabilidad τ en todas las ranuras
#   en_cola    -> llegadas Poisson(λ) al inicio de la ranura, luego el intento
#   adaptativo -> en_cola + re-solución de τ cada `longitud_epoca` ranuras
#                 con pesos ln(1 + Q) de las colas actuales
#
# Un intento del enlace i falla si transmitió algún enlace en conflicto
# primario, o uno en conflicto sólo-secundario sobre el mismo canal.
import logging
import zlib
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.stats.weightstats import DescrStatsW

from Scripts.errores import ErrorEscenario, ErrorPolitica, ErrorTopologia
from Scripts.optimizacion_equidad import Tolerancias, TransmitPolicy, solver_por_topologia, weights_from_queues

logger = logging.getLogger(__name__)

MODOS = ("saturado", "en_cola", "adaptativo")
CONTENCIONES = ("condicionada", "persistente")
RANURAS_POR_DEFECTO = 100_000
SEMILLA_POR_DEFECTO = 1
EPOCA_POR_DEFECTO = 100
BLOQUE_POR_DEFECTO = 4096
SIGNIFICANCIA_GEOMETRICA = 0.01

ETIQUETA_ENLACE = zlib.crc32(b"enlace")
ETIQUETA_LLEGADAS = zlib.crc32(b"llegadas")


@dataclass(frozen=True)
class SimConfig:
    modo: str = "saturado"
    ranuras: int = RANURAS_POR_DEFECTO
    semilla: int = SEMILLA_POR_DEFECTO
    tasas_llegada: object = 0.0
    longitud_epoca: int = EPOCA_POR_DEFECTO
    e_tx: float = 1.0
    contencion: str = "condicionada"
    cola_inicial: object = 0
    bloque: int = BLOQUE_POR_DEFECTO
    tolerancias: Tolerancias | None = None

    def __post_init__(self):
        if self.modo not in MODOS:
            raise ErrorEscenario(f"modo desconocido '{self.modo}', opciones {MODOS}", campo="simulacion.modo")
        if self.contencion not in CONTENCIONES:
            raise ErrorEscenario(f"contención desconocida '{self.contencion}'", campo="simulacion.contencion")
        if int(self.ranuras) != self.ranuras or self.ranuras < 1:
            raise ErrorEscenario("debe ser un entero ≥ 1", campo="simulacion.ranuras")
        if int(self.longitud_epoca) != self.longitud_epoca or self.longitud_epoca < 1:
            raise ErrorEscenario("debe ser un entero ≥ 1", campo="simulacion.epoca")
        if int(self.semilla) != self.semilla or not 0 <= self.semilla < 2**64:
            raise ErrorEscenario("debe ser un entero sin signo de 64 bits", campo="simulacion.semilla")
        if self.e_tx <= 0:
            raise ErrorEscenario("debe ser positivo", campo="simulacion.e_tx")
        if self.bloque < 1:
            raise ErrorEscenario("debe ser ≥ 1", campo="simulacion.bloque")
        tasas = np.asarray(self.tasas_llegada, dtype=float)
        if np.any(~np.isfinite(tasas)) or np.any(tasas < 0):
            raise ErrorEscenario("las tasas deben ser no negativas", campo="lambda")
        cola = np.asarray(self.cola_inicial)
        if np.any(cola < 0) or np.any(cola != np.floor(cola)):
            raise ErrorEscenario("debe ser entero no negativo", campo="simulacion.cola_inicial")

    def con_semilla(self, semilla):
        return SimConfig(**{**self.__dict__, "semilla": int(semilla)})


@dataclass
class SimTrace:
    ranuras: int
    e_tx: float
    intentos: np.ndarray
    exitos: np.ndarray
    llegadas: np.ndarray
    cola_inicial: np.ndarray
    cola_final: np.ndarray
    permanencias: list = field(repr=False)
    servicios: list = field(repr=False)
    historial_tau: list = field(default_factory=list, repr=False)
    historial_colas: list = field(default_factory=list, repr=False)
    no_convergencias: int = 0

    @property
    def colisiones(self):
        return self.intentos - self.exitos

    @property
    def exitos_totales(self):
        return int(self.exitos.sum())

    @property
    def throughput_empirico(self):
        return self.exitos_totales / self.ranuras

    @property
    def intentos_por_exito(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.exitos > 0, self.intentos / np.maximum(self.exitos, 1), np.inf)

    @property
    def permanencia_media(self):
        return np.array([p.mean() if p.size else np.nan for p in self.permanencias])

    @property
    def servicio_medio(self):
        return np.array([s.mean() if s.size else np.nan for s in self.servicios])

    def summary(self):
        """Métricas en formato largo: (metrica, enlace, valor); enlace -1 = sistema."""
        S = self.intentos.size
        enlaces = np.arange(S)
        with np.errstate(divide="ignore", invalid="ignore"):
            p_empirica = np.where(self.intentos > 0, self.exitos / np.maximum(self.intentos, 1), np.nan)
        bloques = [
            pd.DataFrame({"metrica": "throughput", "enlace": [-1], "valor": [self.throughput_empirico]}),
            pd.DataFrame({"metrica": "tasa_exito", "enlace": enlaces, "valor": self.exitos / self.ranuras}),
            pd.DataFrame({"metrica": "p_empirica", "enlace": enlaces, "valor": p_empirica}),
            pd.DataFrame({"metrica": "intentos_por_exito", "enlace": enlaces, "valor": self.intentos_por_exito}),
            pd.DataFrame(
                {"metrica": "energia_por_exito", "enlace": enlaces, "valor": self.intentos_por_exito * self.e_tx}
            ),
            pd.DataFrame({"metrica": "servicio_medio", "enlace": enlaces, "valor": self.servicio_medio}),
            pd.DataFrame({"metrica": "permanencia_media", "enlace": enlaces, "valor": self.permanencia_media}),
            pd.DataFrame({"metrica": "cola_final", "enlace": enlaces, "valor": self.cola_final.astype(float)}),
        ]
        return pd.concat(bloques, ignore_index=True)


# 🔀 Flujos aleatorios con nombre

def _generador(semilla, etiqueta, indice):
    secuencia = np.random.SeedSequence(entropy=int(semilla), spawn_key=(etiqueta, indice))
    return np.random.Generator(np.random.PCG64(secuencia))


class _Flujos:
    """Un generador por enlace (U, canal) y otro para las llegadas."""

    def __init__(self, semilla, S, M, tasas):
        self.M = M
        self.tasas = tasas
        self.enlaces = [_generador(semilla, ETIQUETA_ENLACE, i) for i in range(S)]
        self.llegadas = _generador(semilla, ETIQUETA_LLEGADAS, 0)

    def bloque(self, b, con_llegadas):
        U = np.empty((b, len(self.enlaces)))
        canales = np.empty((b, len(self.enlaces)), dtype=np.int64)
        for i, gen in enumerate(self.enlaces):
            U[:, i] = gen.random(b)
            canales[:, i] = gen.integers(self.M, size=b)
        llegadas = self.llegadas.poisson(self.tasas, size=(b, len(self.enlaces))) if con_llegadas else None
        return U, canales, llegadas


# ⚔️ Resolución de conflictos

def _marcar_conflictos(grupo, enlace, matriz, fallo):
    """Marca ambos eventos de cada par en conflicto dentro del mismo grupo.

    `grupo` debe venir ordenado: los eventos de un grupo son contiguos, así que
    basta recorrer distancias d hasta que ningún par a distancia d comparta grupo.
    """
    n = grupo.size
    d = 1
    while d < n:
        mismo = grupo[d:] == grupo[:-d]
        if not mismo.any():
            break
        choque = mismo & matriz[enlace[:-d], enlace[d:]]
        fallo[:-d] |= choque
        fallo[d:] |= choque
        d += 1


def resolver_exitos(intentos, canales, conflicts, M):
    """Matriz booleana (ranura, enlace) de transmisiones exitosas."""
    ranura, enlace = np.nonzero(intentos)
    canal = canales[ranura, enlace]
    fallo = np.zeros(ranura.size, dtype=bool)
    if conflicts.primaria.any():
        _marcar_conflictos(ranura, enlace, conflicts.primaria, fallo)
    if conflicts.secundaria.any():
        clave = ranura * M + canal
        orden = np.argsort(clave, kind="stable")
        fallo_canal = np.zeros_like(fallo)
        _marcar_conflictos(clave[orden], enlace[orden], conflicts.secundaria, fallo_canal)
        fallo[orden] |= fallo_canal
    exitos = np.zeros_like(intentos, dtype=bool)
    exitos[ranura[~fallo], enlace[~fallo]] = True
    return exitos


def _exitos_ranura(activos, canales, primaria, secundaria):
    tx = np.flatnonzero(activos)
    exito = np.zeros(activos.size, dtype=bool)
    if tx.size == 0:
        return exito
    ch = canales[tx]
    choque = primaria[np.ix_(tx, tx)] | (secundaria[np.ix_(tx, tx)] & (ch[:, None] == ch[None, :]))
    exito[tx] = ~choque.any(axis=1)
    return exito


# 📦 Contabilidad de colas FIFO

class _Colas:
    """Tiempos de llegada pendientes por enlace; -1 marca paquetes de Q(0)."""

    def __init__(self, cola_inicial):
        self.pendientes = [deque([-1] * int(q)) for q in cola_inicial]
        self.ultima_salida = [-1] * len(cola_inicial)
        self.permanencias = [[] for _ in cola_inicial]
        self.servicios = [[] for _ in cola_inicial]

    def llegar(self, enlace, t, cantidad):
        self.pendientes[enlace].extend([t] * int(cantidad))

    def salir(self, enlace, t):
        llegada = self.pendientes[enlace].popleft()
        inicio = max(llegada, self.ultima_salida[enlace] + 1, 0)
        self.servicios[enlace].append(t - inicio + 1)
        if llegada >= 0:
            self.permanencias[enlace].append(t - llegada + 1)
        self.ultima_salida[enlace] = t

    def largos(self):
        return np.array([len(p) for p in self.pendientes], dtype=np.int64)

    def resultados(self):
        return (
            [np.asarray(p, dtype=np.int64) for p in self.permanencias],
            [np.asarray(s, dtype=np.int64) for s in self.servicios],
        )


# 🏃 Bucles por modo

def _correr_saturado(flujos, tau, conflicts, config, S, M):
    intentos = np.zeros(S, dtype=np.int64)
    exitos = np.zeros(S, dtype=np.int64)
    hechas = 0
    while hechas < config.ranuras:
        b = min(config.bloque, config.ranuras - hechas)
        U, canales, _ = flujos.bloque(b, con_llegadas=False)
        A = U < tau[None, :]
        h = resolver_exitos(A, canales, conflicts, M)
        intentos += A.sum(axis=0)
        exitos += h.sum(axis=0)
        hechas += b
    vacio = [np.zeros(0, dtype=np.int64) for _ in range(S)]
    ceros = np.zeros(S, dtype=np.int64)
    return SimTrace(config.ranuras, config.e_tx, intentos, exitos, ceros, ceros, ceros.copy(), vacio, list(vacio))


def _correr_persistente(flujos, tau, conflicts, config, S, M, cola0):
    """Contención persistente: el intento no depende de la cola, así que la cola
    es una recursión de Lindley sobre oportunidades de servicio precalculadas."""
    intentos = np.zeros(S, dtype=np.int64)
    salidas_tot = np.zeros(S, dtype=np.int64)
    llegadas_tot = np.zeros(S, dtype=np.int64)
    cola = cola0.copy()
    colas = _Colas(cola0)
    hechas = 0
    while hechas < config.ranuras:
        b = min(config.bloque, config.ranuras - hechas)
        U, canales, a = flujos.bloque(b, con_llegadas=True)
        A = U < tau[None, :]
        h = resolver_exitos(A, canales, conflicts, M)
        for i in range(S):
            paso = a[:, i] - h[:, i]
            camino = cola[i] + np.cumsum(paso)
            Q = camino - np.minimum(0, np.minimum.accumulate(camino))
            previa = np.concatenate(([cola[i]], Q[:-1]))
            hay_paquete = previa + a[:, i] > 0
            salida = h[:, i] & hay_paquete
            intentos[i] += int((A[:, i] & hay_paquete).sum())

            t_llegada = hechas + np.repeat(np.arange(b), a[:, i])
            colas.pendientes[i].extend(t_llegada.tolist())
            for t in (hechas + np.flatnonzero(salida)).tolist():
                colas.salir(i, t)
            salidas_tot[i] += int(salida.sum())
            llegadas_tot[i] += int(a[:, i].sum())
            cola[i] = Q[-1]
        hechas += b
    permanencias, servicios = colas.resultados()
    return SimTrace(
        config.ranuras, config.e_tx, intentos, salidas_tot, llegadas_tot, cola0.copy(), cola, permanencias, servicios
    )


def _correr_condicionado(flujos, tau, conflicts, config, S, M, cola0, resolver=None):
    """Intentos sólo con cola no vacía; en modo adaptativo re-resuelve τ por época."""
    intentos = np.zeros(S, dtype=np.int64)
    salidas_tot = np.zeros(S, dtype=np.int64)
    llegadas_tot = np.zeros(S, dtype=np.int64)
    Q = cola0.copy()
    colas = _Colas(cola0)
    historial = []
    colas_epoca = []
    no_convergencias = 0
    primaria, secundaria = conflicts.primaria, conflicts.secundaria
    hechas = 0
    while hechas < config.ranuras:
        b = min(config.bloque, config.ranuras - hechas)
        U, canales, a = flujos.bloque(b, con_llegadas=True)
        for k in range(b):
            t = hechas + k
            if resolver is not None and t % config.longitud_epoca == 0 and (t > 0 or tau is None):
                tau, fallo = _resolver_epoca(resolver, Q, S)
                no_convergencias += fallo
                historial.append(tau.copy())
                colas_epoca.append(Q.copy())
            llegan = np.flatnonzero(a[k])
            for i in llegan:
                colas.llegar(i, t, a[k, i])
            Q += a[k]
            activos = (U[k] < tau) & (Q > 0)
            exito = _exitos_ranura(activos, canales[k], primaria, secundaria)
            for i in np.flatnonzero(exito):
                colas.salir(i, t)
            intentos += activos
            salidas_tot += exito
            llegadas_tot += a[k]
            Q -= exito
        hechas += b
    permanencias, servicios = colas.resultados()
    return SimTrace(
        config.ranuras,
        config.e_tx,
        intentos,
        salidas_tot,
        llegadas_tot,
        cola0.copy(),
        Q,
        permanencias,
        servicios,
        historial,
        colas_epoca,
        no_convergencias,
    )


def _resolver_epoca(resolver, Q, S):
    reporte = resolver(weights_from_queues(Q))
    if reporte.degenerate:
        # todas las colas vacías: pesos iguales
        reporte = resolver(np.ones(S))
    if not reporte.converged:
        logger.warning(f"⚠️ La re-solución de época no convergió (residuo KKT {reporte.kkt_residual:.3g}).")
        return reporte.policy.tau, 1
    return reporte.policy.tau, 0


# 🚀 Punto de entrada

def run(net, conflicts, policy, config):
    """Simula `config.ranuras` ranuras.

    `policy` puede ser un TransmitPolicy, un vector τ, un resolvedor
    (pesos -> SolverReport) o None; en modo adaptativo una política fija sólo
    se usa en la primera época y None elige el solver según la topología.
    """
    S = net.link_count
    M = net.channel_count
    if S == 0:
        raise ErrorTopologia("La red no tiene enlaces que simular.")

    resolver = None
    if callable(policy):
        resolver = policy
        tau = None
    elif policy is None:
        tau = None
    else:
        tau = policy.tau if isinstance(policy, TransmitPolicy) else TransmitPolicy(policy, M).tau
        if tau.size != S:
            raise ErrorPolitica(f"La política tiene {tau.size} entradas y la red {S} enlaces.")

    cola0 = np.broadcast_to(np.asarray(config.cola_inicial, dtype=np.int64), (S,)).copy()
    tasas = np.broadcast_to(np.asarray(config.tasas_llegada, dtype=float), (S,)).copy()

    if config.modo == "adaptativo":
        resolver = resolver or solver_por_topologia(net, conflicts, config.tolerancias)
    elif tau is None:
        resolver = resolver or solver_por_topologia(net, conflicts, config.tolerancias)
        pesos = weights_from_queues(cola0) if cola0.any() else np.ones(S)
        tau = resolver(pesos).policy.tau
        resolver = None

    flujos = _Flujos(config.semilla, S, M, tasas)
    logger.debug(f"🎲 Simulando {config.ranuras} ranuras en modo {config.modo} (semilla {config.semilla})")
    if config.modo == "saturado":
        return _correr_saturado(flujos, tau, conflicts, config, S, M)
    if config.modo == "en_cola" and config.contencion == "persistente":
        return _correr_persistente(flujos, tau, conflicts, config, S, M, cola0)
    return _correr_condicionado(flujos, tau, conflicts, config, S, M, cola0, resolver)


# 🔁 Réplicas

@dataclass
class AgregadoReplicas:
    tabla: pd.DataFrame
    trazas: list = field(repr=False)


def _correr_replica(argumentos):
    net, conflicts, policy, config = argumentos
    return run(net, conflicts, policy, config)


def run_replications(net, conflicts, policy, config, replications, workers=None):
    """Corre semillas semilla, semilla+1, ... y agrega cada métrica con DescrStatsW.

    Con `workers` > 1 usa un pool de procesos; la política debe ser serializable
    (TransmitPolicy, vector o None), no un resolvedor local.
    """
    if replications < 1:
        raise ValueError("replications debe ser ≥ 1.")
    tareas = [(net, conflicts, policy, config.con_semilla(config.semilla + r)) for r in range(replications)]
    if workers and workers > 1 and replications > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            trazas = list(executor.map(_correr_replica, tareas))
    else:
        trazas = [_correr_replica(t) for t in tareas]
    return AgregadoReplicas(agregar_trazas(trazas), trazas)


def agregar_trazas(trazas):
    largo = pd.concat([t.summary().assign(replica=r) for r, t in enumerate(trazas)], ignore_index=True)
    filas = []
    for (metrica, enlace), grupo in largo.groupby(["metrica", "enlace"], sort=False):
        valores = grupo["valor"].to_numpy(dtype=float)
        valores = valores[np.isfinite(valores)]
        filas.append({"metrica": metrica, "enlace": enlace, **_estadisticos(valores)})
    return pd.DataFrame(filas, columns=["metrica", "enlace", "media", "desv", "error_estandar", "ic95_inf", "ic95_sup"])


def _estadisticos(valores):
    n = valores.size
    if n == 0:
        return dict(media=np.nan, desv=np.nan, error_estandar=np.nan, ic95_inf=np.nan, ic95_sup=np.nan)
    if n == 1:
        v = float(valores[0])
        return dict(media=v, desv=0.0, error_estandar=0.0, ic95_inf=v, ic95_sup=v)
    d = DescrStatsW(valores, ddof=1)
    if d.std == 0:
        return dict(media=d.mean, desv=0.0, error_estandar=0.0, ic95_inf=d.mean, ic95_sup=d.mean)
    inf, sup = d.tconfint_mean(alpha=0.05)
    return dict(media=d.mean, desv=d.std, error_estandar=d.std / np.sqrt(n), ic95_inf=inf, ic95_sup=sup)


# 📐 Ajuste geométrico del tiempo de servicio

@dataclass(frozen=True)
class AjusteGeometrico:
    estadistico: float
    p_valor: float
    grados: int
    rechaza: bool


def geometric_fit(service_times, q, minimo_esperado=5.0):
    """Chi-cuadrado de los tiempos de servicio contra Geométrica(q) en {1, 2, ...}.

    Las categorías k = 1..K-1 y la cola k ≥ K se eligen con frecuencia esperada
    ≥ `minimo_esperado`.
    """
    x = np.asarray(service_times, dtype=np.int64)
    n = x.size
    if n == 0 or not 0 < q <= 1:
        raise ValueError("Se requieren tiempos de servicio y q en (0, 1].")
    K = 1
    while n * stats.geom.pmf(K, q) >= minimo_esperado and n * stats.geom.sf(K, q) >= minimo_esperado:
        K += 1
    if K == 1:
        return AjusteGeometrico(0.0, 1.0, 0, False)
    observados = np.bincount(np.minimum(x, K), minlength=K + 1)[1:]
    esperados = n * np.append(stats.geom.pmf(np.arange(1, K), q), stats.geom.sf(K - 1, q))
    resultado = stats.chisquare(observados, esperados)
    return AjusteGeometrico(
        float(resultado.statistic),
        float(resultado.pvalue),
        K - 1,
        bool(resultado.pvalue < SIGNIFICANCIA_GEOMETRICA),
    )
