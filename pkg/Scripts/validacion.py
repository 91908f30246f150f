# 🔍 Oráculos y chequeos de propiedades de la orden `validate`
#
# Cada chequeo devuelve una fila (chequeo, paso, residuo, umbral, detalle).
import itertools
import logging
import math

import numpy as np
import pandas as pd
from scipy import optimize

from Scripts.analisis_rendimiento import (
    log_fit,
    poisson_binomial,
    poisson_binomial_dp,
    second_differences,
    service_moments,
    system_throughput,
    tagged_success_prob,
)
from Scripts.modelo_red_tsch import conflict_sets, random_network, star_channels
from Scripts.optimizacion_equidad import (
    concavity_selftest,
    link_success_probs,
    objective,
    solve_general,
    solve_star,
)

logger = logging.getLogger(__name__)

UMBRAL_DFT = 1e-10
UMBRAL_ENUMERACION = 1e-12
UMBRAL_CRUCE = 1e-5
UMBRAL_ORACULO = 1e-4
UMBRAL_IDENTIDAD = 1e-9
UMBRAL_R2 = 0.01
UMBRAL_CONCAVIDAD_CURVA = 1e-6
MAX_ENLACES_SLSQP = 40
MUESTRAS_CERTIFICADO = 1000


def _fila(chequeo, residuo, umbral, detalle=""):
    return {
        "chequeo": chequeo,
        "paso": bool(residuo <= umbral),
        "residuo": float(residuo),
        "umbral": float(umbral),
        "detalle": detalle,
    }


# 🧪 Oráculos independientes

def throughput_por_enumeracion(tau, M):
    """E[éxitos por ranura] recorriendo 2^N patrones y M^k asignaciones de canal."""
    tau = np.asarray(tau, dtype=float)
    N = tau.size
    total = 0.0
    for patron in itertools.product((0, 1), repeat=N):
        transmiten = [i for i in range(N) if patron[i]]
        prob = math.prod(tau[i] if patron[i] else 1 - tau[i] for i in range(N))
        if prob == 0 or not transmiten:
            continue
        k = len(transmiten)
        for canales in itertools.product(range(M), repeat=k):
            unicos = sum(1 for c in canales if canales.count(c) == 1)
            total += prob * unicos / M**k
    return total


def conflictos_por_definicion(net):
    """Conjuntos primarios y secundarios evaluando la definición par a par."""
    N_int = [set(s) for s in net.interference_sets]
    primarios, secundarios = [], []
    for i, (n, m) in enumerate(net.links):
        prim, sec = set(), set()
        for j, (l, k) in enumerate(net.links):
            if i == j:
                continue
            comun = {n, m} & {l, k}
            receptor_multicanal = comun == {m} and m == k and m in net.multichannel_sinks and n != l
            if comun and not receptor_multicanal:
                prim.add(j)
            elif m in N_int[l] or k in N_int[n]:
                sec.add(j)
        primarios.append(frozenset(prim))
        secundarios.append(frozenset(sec))
    return tuple(primarios), tuple(secundarios)


def optimo_slsqp(net, conflicts, weights):
    """Máximo de F por SLSQP bajo τᵢ + Σ_{𝓘ˢᵢ} τⱼ ≤ M; oráculo para redes chicas."""
    w = np.asarray(weights, dtype=float)
    S = net.link_count
    M = net.channel_count
    A = np.eye(S) + conflicts.matriz_total
    activos = w > 0
    x0 = np.where(activos, min(0.5, M / A.sum(axis=1).max()) * 0.9, 0.0)

    def negativo(tau):
        valor = objective(net, conflicts, w, np.clip(tau, 0.0, 1.0))
        return -valor if np.isfinite(valor) else 1e12

    limites = [(1e-9, 1.0 - 1e-9) if a else (0.0, 0.0) for a in activos]
    resultado = optimize.minimize(
        negativo,
        x0,
        method="SLSQP",
        bounds=limites,
        constraints=[{"type": "ineq", "fun": lambda t: M - A @ t, "jac": lambda t: -A}],
        options={"ftol": 1e-12, "maxiter": 1000},
    )
    return -resultado.fun, resultado.x


def muestras_factibles(net, conflicts, cantidad, rng):
    """Puntos uniformes en la caja reescalados hasta cumplir todas las restricciones."""
    S = net.link_count
    A = np.eye(S) + conflicts.matriz_total
    U = rng.uniform(0.0, 1.0, size=(cantidad, S))
    carga = U @ A.T
    escala = np.minimum(1.0, net.channel_count / carga.max(axis=1))
    return U * escala[:, None]


# ✅ Chequeos

def chequear_dominio_tau(tau):
    if tau is None:
        return _fila("dominio_tau", 0.0, 0.0, "sin τ fijo en el escenario")
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    exceso = np.maximum.reduce([tau - 1.0, -tau, np.zeros_like(tau)])
    malos = np.flatnonzero(exceso > 0).tolist()
    return _fila("dominio_tau", exceso.max(), 0.0, f"enlaces fuera de [0, 1]: {malos}" if malos else "")


def chequear_conflictos(net, conflicts):
    primarios, secundarios = conflictos_por_definicion(net)
    diferencias = sum(a != b for a, b in zip(primarios, conflicts.primary))
    diferencias += sum(a != b for a, b in zip(secundarios, conflicts.secondary_only))
    asimetria = int((conflicts.primaria != conflicts.primaria.T).sum() + (conflicts.secundaria != conflicts.secundaria.T).sum())
    return [
        _fila("conflictos_por_definicion", diferencias, 0, f"{net.link_count} enlaces"),
        _fila("simetria_conflictos", asimetria, 0),
    ]


def chequear_dft(rng, ensayos):
    peor = 0.0
    for _ in range(ensayos):
        tau = rng.uniform(0.0, 1.0, size=int(rng.integers(1, 21)))
        peor = max(peor, np.abs(poisson_binomial(tau).pmf - poisson_binomial_dp(tau).pmf).max())
    return _fila("poisson_binomial_dft_vs_dp", peor, UMBRAL_DFT, f"{ensayos} vectores, N ≤ 20")


def chequear_enumeracion(rng, ensayos):
    peor = 0.0
    for N in range(1, 5):
        for M in range(1, 4):
            for _ in range(ensayos):
                tau = rng.uniform(0.0, 1.0, size=N)
                peor = max(peor, abs(system_throughput(tau, M) - throughput_por_enumeracion(tau, M)))
    return _fila("throughput_vs_enumeracion", peor, UMBRAL_ENUMERACION, "N ≤ 4, M ≤ 3")


def chequear_serie_servicio(rng, ensayos):
    peor = 0.0
    for q in rng.uniform(0.05, 1.0, size=ensayos):
        n = np.arange(1, int(np.ceil(np.log(1e-16) / np.log1p(-q))) + 2 if q < 1 else 2)
        pmf = q * (1 - q) ** (n - 1)
        media, segundo = service_moments(q, 1.0)
        peor = max(peor, abs(media - n @ pmf) / media, abs(segundo - (n**2) @ pmf) / segundo)
    return _fila("serie_servicio", peor, 1e-9, "momentos vs suma directa")


def chequear_concavidad(net, conflicts, pesos, ensayos, semilla):
    filas = []
    reporte = concavity_selftest(net, conflicts, pesos, ensayos, seed=semilla)
    filas.append(
        _fila("concavidad_escenario", reporte.violaciones, 0, f"peor segunda diferencia {reporte.peor_violacion:.3g}")
    )
    filas.append(_fila("hessiano_diagonal", reporte.peor_error_hessiano, 1e-3, "error relativo vs diferencias finitas"))
    rng = np.random.default_rng(semilla)
    violaciones = 0
    for r in range(ensayos):
        red = random_network(8, int(rng.integers(1, 4)), 0.5, semilla + r)
        if red.link_count == 0:
            continue
        conf = conflict_sets(red)
        w = rng.uniform(0.1, 2.0, size=red.link_count)
        violaciones += concavity_selftest(red, conf, w, 5, seed=semilla + r).violaciones
    filas.append(_fila("concavidad_aleatoria", violaciones, 0, f"{ensayos} redes de 8 nodos"))
    return filas


def chequear_solvers(net, conflicts, pesos, tolerancias, rng):
    filas = []
    S = net.link_count
    general = solve_general(net, conflicts, pesos, net.channel_count, tolerancias)
    filas.append(
        _fila(
            "convergencia_general",
            general.kkt_residual if general.converged else math.inf,
            max(tolerancias.tol_feas, tolerancias.tol_stat),
            f"{general.iterations} iteraciones",
        )
    )
    canales = star_channels(net, conflicts)
    if canales is not None:
        estrella = solve_star(pesos, canales, tolerancias)
        diferencia = np.abs(estrella.policy.tau - general.policy.tau).max(initial=0.0)
        filas.append(_fila("estrella_vs_general", diferencia, UMBRAL_CRUCE, f"M efectivo {canales}"))
        w = np.asarray(pesos.w if hasattr(pesos, "w") else pesos)
        libres = (estrella.policy.tau < 1) & (w > 0)
        if libres.sum() > 1:
            razon = estrella.policy.tau[libres] / w[libres]
            filas.append(_fila("proporcionalidad_tau_w", (razon.max() - razon.min()) / razon.mean(), 1e-6))
    elif S <= MAX_ENLACES_SLSQP:
        valor_oraculo, _ = optimo_slsqp(net, conflicts, pesos.w)
        filas.append(
            _fila("general_vs_slsqp", max(0.0, valor_oraculo - general.objective_value), UMBRAL_ORACULO, f"{S} enlaces")
        )
    else:
        filas.append(_fila("general_vs_slsqp", 0.0, UMBRAL_ORACULO, f"omitido: {S} enlaces > {MAX_ENLACES_SLSQP}"))

    muestras = muestras_factibles(net, conflicts, MUESTRAS_CERTIFICADO, rng)
    mejor = max(objective(net, conflicts, pesos, t) for t in muestras)
    filas.append(
        _fila("certificado_aleatorio", max(0.0, mejor - general.objective_value), 1e-9, f"{MUESTRAS_CERTIFICADO} puntos factibles")
    )
    return filas, general


def chequear_identidad_p_T(tau, M):
    T = system_throughput(tau, M)
    suma = sum(t * tagged_success_prob(tau, M, i) for i, t in enumerate(tau))
    return _fila("identidad_p_T", abs(T - suma), UMBRAL_IDENTIDAD, f"T = {T:.6g}")


def chequear_forma_logaritmica(net, conflicts, politica, lambdas, factor_cola):
    mu = link_success_probs(net, conflicts, politica)
    ajuste = log_fit(lambdas, mu, escala=factor_cola)
    orden = np.argsort(lambdas)
    x, y = np.asarray(lambdas)[orden], mu[orden]
    separados = np.concatenate(([True], np.diff(x) >= 1e-3))
    # grilla irregular: se descartan puntos casi repetidos antes de derivar
    x, y = x[separados], y[separados]
    curvatura = second_differences(x, y).max(initial=-math.inf) if x.size >= 3 else -math.inf
    return [
        _fila("forma_logaritmica", 1 - ajuste.r2, UMBRAL_R2, f"pendiente {ajuste.pendiente:.4g}, R² {ajuste.r2:.6f}"),
        _fila("concavidad_throughput_lambda", max(0.0, curvatura), UMBRAL_CONCAVIDAD_CURVA),
    ]


def validar(escenario):
    """Corre la batería completa a la escala del escenario y devuelve la tabla."""
    ensayos = escenario.validacion["ensayos"]
    semilla = escenario.validacion["semilla"]
    rng = np.random.default_rng(semilla)

    net = escenario.construir_red()
    conflicts = conflict_sets(net)
    S = net.link_count
    pesos = escenario.pesos_para(S)
    if pesos.total == 0:
        pesos = type(pesos)(np.ones(S))

    filas = [chequear_dominio_tau(escenario.tau)]
    filas += chequear_conflictos(net, conflicts)
    filas.append(chequear_dft(rng, ensayos))
    filas.append(chequear_enumeracion(rng, ensayos))
    filas.append(chequear_serie_servicio(rng, ensayos))
    filas += chequear_concavidad(net, conflicts, pesos, ensayos, semilla)
    if S > 0:
        solver_filas, general = chequear_solvers(net, conflicts, pesos, escenario.tolerancias(), rng)
        filas += solver_filas
        canales = star_channels(net, conflicts)
        if canales is not None:
            tau = general.policy.tau
            if escenario.tau is not None and filas[0]["paso"]:
                tau = escenario.politica_fija(S).tau
            filas.append(chequear_identidad_p_T(tau, canales))
        if escenario.pesos["fuente"] == "tasas":
            filas += chequear_forma_logaritmica(
                net, conflicts, general.policy, escenario.tasas_llegada(S), escenario.pesos["factor_cola"]
            )

    tabla = pd.DataFrame(filas, columns=["chequeo", "paso", "residuo", "umbral", "detalle"])
    fallidos = tabla.loc[~tabla["paso"], "chequeo"].tolist()
    if fallidos:
        logger.warning(f"❌ Chequeos fallidos: {fallidos}")
    else:
        logger.info(f"✅ {len(tabla)} chequeos superados")
    return tabla
