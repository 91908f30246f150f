# ⚖️ Equidad proporcional ponderada: pesos, objetivo y solvers
#
# F(τ) = Σᵢ wᵢ ln μᵢ(τ), con μᵢ = τᵢ · Π_primarios (1 − τⱼ) · Π_secundarios (1 − τⱼ/M).
# El objetivo es separable por coordenada:
#     F = Σⱼ wⱼ ln τⱼ + cⱼ ln(1 − τⱼ) + dⱼ ln(1 − τⱼ/M)
# con cⱼ (dⱼ) la suma de pesos de los enlaces que tienen a j como conflicto
# primario (secundario). Ambos solvers aprovechan esa forma.
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize

from Scripts.errores import ErrorNumerico, ErrorPolitica, ErrorTopologia
from Scripts.modelo_red_tsch import star_channels

logger = logging.getLogger(__name__)

TOL_FEAS = 1e-6
TOL_STAT = 1e-6
MAX_ITERS = 100_000
ALPHA0 = 0.1
FACTOR_COLA = 0.5


@dataclass(frozen=True)
class Tolerancias:
    tol_feas: float = TOL_FEAS
    tol_stat: float = TOL_STAT
    max_iters: int = MAX_ITERS
    alpha0: float = ALPHA0


@dataclass(frozen=True)
class WeightVector:
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).reshape(-1)
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ErrorPolitica("Los pesos deben ser reales finitos y no negativos.")
        object.__setattr__(self, "w", w)

    def __len__(self):
        return self.w.size

    @property
    def total(self):
        return float(self.w.sum())


@dataclass(frozen=True)
class TransmitPolicy:
    tau: np.ndarray
    channel_count: int

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float).reshape(-1)
        if np.any(~np.isfinite(tau)) or np.any(tau < 0) or np.any(tau > 1):
            malos = np.flatnonzero(~np.isfinite(tau) | (tau < 0) | (tau > 1)).tolist()
            raise ErrorPolitica(f"τ fuera de [0, 1] en los enlaces {malos}.")
        if int(self.channel_count) != self.channel_count or self.channel_count < 1:
            raise ErrorPolitica(f"channel_count debe ser entero ≥ 1 (recibido {self.channel_count}).")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "channel_count", int(self.channel_count))

    def __len__(self):
        return self.tau.size


@dataclass
class SolverReport:
    policy: TransmitPolicy
    objective_value: float
    dual_variable: float
    kkt_residual: float
    iterations: int
    converged: bool = True
    degenerate: bool = False
    multiplicadores: np.ndarray = field(default=None, repr=False)
    residuos: dict = field(default_factory=dict)


def _como_pesos(weights):
    if isinstance(weights, WeightVector):
        return weights.w
    return WeightVector(weights).w


def _como_tau(policy):
    return policy.tau if isinstance(policy, TransmitPolicy) else np.asarray(policy, dtype=float)


# 🧮 Pesos

def weights_from_queues(queue_lengths):
    """wᵢ = ln(1 + Qᵢ); acepta colas fraccionarias (colas promedio)."""
    Q = np.asarray(queue_lengths, dtype=float).reshape(-1)
    if np.any(~np.isfinite(Q)) or np.any(Q < 0):
        raise ErrorPolitica("Las longitudes de cola deben ser no negativas.")
    return WeightVector(np.log1p(Q))


def weights_from_rates(lambdas, queue_factor=FACTOR_COLA):
    """Pesos guiados por tasa: cola promedio Q̄ = κ·λ (κ = 0.5 da λ=0.4 → w = ln 1.2)."""
    lam = np.asarray(lambdas, dtype=float).reshape(-1)
    if np.any(lam < 0):
        raise ErrorPolitica("Las tasas de llegada deben ser no negativas.")
    return weights_from_queues(queue_factor * lam)


# 📈 Probabilidad de éxito, objetivo y derivadas

def _verificar_dimension(net, tau):
    if tau.size != net.link_count:
        raise ErrorPolitica(f"La política tiene {tau.size} entradas y la red {net.link_count} enlaces.")


def success_given_attempt(net, conflicts, policy):
    """Probabilidad de éxito de cada enlace condicionada a que transmita (μᵢ/τᵢ)."""
    tau = _como_tau(policy)
    _verificar_dimension(net, tau)
    M = net.channel_count
    primarios = np.where(conflicts.primaria, 1.0 - tau[None, :], 1.0).prod(axis=1)
    secundarios = np.where(conflicts.secundaria, 1.0 - tau[None, :] / M, 1.0).prod(axis=1)
    return primarios * secundarios


def link_success_probs(net, conflicts, policy):
    return _como_tau(policy) * success_given_attempt(net, conflicts, policy)


def link_success_prob(net, conflicts, policy, link):
    if not 0 <= link < net.link_count:
        raise ErrorTopologia(f"Índice de enlace {link} fuera de rango [0, {net.link_count}).")
    return float(link_success_probs(net, conflicts, policy)[link])


def objective(net, conflicts, weights, policy):
    w = _como_pesos(weights)
    mu = link_success_probs(net, conflicts, policy)
    activos = w > 0
    if np.any(mu[activos] <= 0):
        return -math.inf
    return float(np.sum(w[activos] * np.log(mu[activos])))


def objective_gradient(net, conflicts, weights, policy):
    w = _como_pesos(weights)
    tau = _como_tau(policy)
    _verificar_dimension(net, tau)
    if np.any(tau <= 0) or np.any(tau >= 1):
        raise ErrorPolitica("El gradiente sólo está definido para τ estrictamente interior a (0, 1).")
    M = net.channel_count
    c = conflicts.primaria.T.astype(float) @ w
    d = conflicts.secundaria.T.astype(float) @ w
    return w / tau - c / (1.0 - tau) - (d / M) / (1.0 - tau / M)


def hessian_diagonal(net, conflicts, policy, link):
    """∂²Rᵢ/∂τⱼ² con Rᵢ = ln μᵢ; las derivadas cruzadas son nulas."""
    tau = _como_tau(policy)
    M = net.channel_count
    diag = np.zeros(net.link_count)
    diag[link] = -1.0 / tau[link] ** 2
    primarios = conflicts.primaria[link]
    secundarios = conflicts.secundaria[link]
    diag[primarios] = -1.0 / (1.0 - tau[primarios]) ** 2
    diag[secundarios] = -(1.0 / M**2) / (1.0 - tau[secundarios] / M) ** 2
    return diag


def is_feasible(policy, net=None, conflicts=None, tol=TOL_FEAS):
    tau = _como_tau(policy)
    if np.any(tau < -tol) or np.any(tau > 1 + tol):
        return False
    M = policy.channel_count if isinstance(policy, TransmitPolicy) else net.channel_count
    if conflicts is None:
        return bool(tau.sum() <= M + tol)
    A = np.eye(tau.size) + conflicts.matriz_total
    return bool(np.all(A @ tau <= M + tol))


# ⭐ Estrella de recolección

def _tau_estrella(w, M, gamma):
    """Raíz menor de γτ² − (γM + W)τ + wᵢM = 0, recortada a [0, 1]."""
    W = w.sum()
    b = gamma * M + W
    disc = np.maximum(b * b - 4.0 * gamma * w * M, 0.0)
    raiz = 2.0 * w * M / (b + np.sqrt(disc))
    if gamma > 0:
        mayor = (b + np.sqrt(disc)) / (2.0 * gamma)
        if np.any(mayor < M * (1 - 1e-12)):
            raise ErrorNumerico("La raíz mayor de la cuadrática cayó por debajo de M.")
    return np.clip(raiz, 0.0, 1.0)


def _objetivo_estrella(w, tau, M):
    W = w.sum()
    resto = W - w
    with np.errstate(divide="ignore", invalid="ignore"):
        propio = np.where(w > 0, w * np.log(tau), 0.0)
        ajeno = np.where(resto > 0, resto * np.log1p(-tau / M), 0.0)
    return float(np.sum(propio + ajeno))


def star_dual_function(weights, M, gamma):
    """𝒢(γ) = inf_τ −F(τ) + γ(Στ − M), como problema de minimización de la estrella."""
    if gamma < 0:
        raise ValueError("γ debe ser no negativo.")
    w = _como_pesos(weights)
    tau = _tau_estrella(w, M, gamma)
    return -_objetivo_estrella(w, tau, M) + gamma * (tau.sum() - M)


def star_optimal_gamma(weights, M, tol=TOL_FEAS):
    """Maximizador de 𝒢: la derivada es Στ(γ) − M y decrece con γ."""
    w = _como_pesos(weights)
    exceso = lambda g: _tau_estrella(w, M, g).sum() - M  # noqa: E731
    if exceso(0.0) <= tol:
        return 0.0
    alto = 1.0
    while exceso(alto) > 0:
        alto *= 2.0
    return float(optimize.brentq(exceso, 0.0, alto, xtol=1e-14))


def star_dual_curve(weights, M, gammas):
    filas = [{"gamma": float(g), "dual": star_dual_function(weights, M, float(g))} for g in gammas]
    return pd.DataFrame(filas, columns=["gamma", "dual"])


def _residuos_estrella(w, tau, M, gamma):
    W = w.sum()
    resto = W - w
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(w > 0, w / tau, 0.0) - np.where(resto > 0, resto / (M - tau), 0.0) - gamma
    estacionariedad = np.abs(np.clip(tau + g, 0.0, 1.0) - tau)
    exceso = tau.sum() - M
    return {
        "factibilidad": max(0.0, float(exceso)),
        "holgura_complementaria": abs(gamma * exceso),
        "estacionariedad": float(estacionariedad.max(initial=0.0)),
    }


def solve_star(weights, M, tolerancias=None):
    """Óptimo de la estrella: τᵢ = min(1, M·wᵢ/W) con γ* = 0 salvo que Στ supere M."""
    tolerancias = tolerancias or Tolerancias()
    w = _como_pesos(weights)
    if w.sum() <= 0:
        logger.warning("⚠️ Todos los pesos son nulos: se devuelve τ = 0.")
        return SolverReport(
            policy=TransmitPolicy(np.zeros(w.size), M),
            objective_value=0.0,
            dual_variable=0.0,
            kkt_residual=0.0,
            iterations=0,
            degenerate=True,
        )
    gamma = star_optimal_gamma(w, M, tolerancias.tol_feas)
    tau = _tau_estrella(w, M, gamma)
    residuos = _residuos_estrella(w, tau, M, gamma)
    kkt = max(residuos.values())
    return SolverReport(
        policy=TransmitPolicy(tau, M),
        objective_value=_objetivo_estrella(w, tau, M),
        dual_variable=gamma,
        kkt_residual=kkt,
        iterations=1,
        converged=kkt <= max(tolerancias.tol_feas, tolerancias.tol_stat),
        residuos=residuos,
    )


# 🌐 Topología general: subgradiente dual

def _lagrangiano_coordenadas(t, a, c, d, rho, M):
    with np.errstate(divide="ignore", invalid="ignore"):
        valor = (
            np.where(a > 0, a * np.log(t), 0.0)
            + np.where(c > 0, c * np.log1p(-t), 0.0)
            + np.where(d > 0, d * np.log1p(-t / M), 0.0)
            - rho * t
        )
    return np.nan_to_num(valor, nan=-np.inf)


def _derivadas(t, a, c, d, rho, M):
    with np.errstate(divide="ignore", invalid="ignore"):
        g1 = (
            np.where(a > 0, a / t, 0.0)
            - np.where(c > 0, c / (1.0 - t), 0.0)
            - np.where(d > 0, (d / M) / (1.0 - t / M), 0.0)
            - rho
        )
        g2 = (
            -np.where(a > 0, a / t**2, 0.0)
            - np.where(c > 0, c / (1.0 - t) ** 2, 0.0)
            - np.where(d > 0, (d / M**2) / (1.0 - t / M) ** 2, 0.0)
        )
    return np.nan_to_num(g1, nan=-np.inf, posinf=np.inf), g2


def _residuo_proyectado(t, g1):
    return np.abs(np.clip(t + g1, 0.0, 1.0) - t)


def _maximizar_lagrangiano(t0, a, c, d, rho, M, max_pasos=100):
    """Ascenso de gradiente proyectado escalado por la diagonal del hessiano,
    con backtracking de Armijo por coordenada. Sólo coordenadas con a > 0."""
    barrera = (c > 0) | ((M == 1) & (d > 0))
    t = np.where(barrera, np.clip(t0, 1e-9, 1 - 1e-9), np.clip(t0, 1e-9, 1.0))
    for _ in range(max_pasos):
        g1, g2 = _derivadas(t, a, c, d, rho, M)
        if _residuo_proyectado(t, g1).max(initial=0.0) <= 1e-13:
            break
        paso = np.where(g2 < 0, -g1 / g2, g1)
        actual = _lagrangiano_coordenadas(t, a, c, d, rho, M)
        escala = np.ones_like(t)
        candidato = t
        for _ in range(60):
            candidato = np.clip(t + escala * paso, 1e-300, 1.0)
            valor = _lagrangiano_coordenadas(candidato, a, c, d, rho, M)
            aceptado = valor >= actual + 1e-4 * g1 * (candidato - t)
            if np.all(aceptado):
                break
            escala = np.where(aceptado, escala, escala / 2)
        candidato = np.where(aceptado, candidato, t)
        if np.array_equal(candidato, t):
            break
        t = candidato
    return t


def solve_general(net, conflicts, weights, M=None, tolerancias=None):
    """Topología general por subgradiente dual proyectado con paso α₀/√k.

    Un multiplicador por restricción τᵢ + Σ_{𝓘ˢᵢ} τⱼ ≤ M. Enlaces con peso nulo
    quedan en τ = 0 y fuera del objetivo.
    """
    tolerancias = tolerancias or Tolerancias()
    w = _como_pesos(weights)
    M = int(M or net.channel_count)
    S = net.link_count
    if w.size != S:
        raise ErrorPolitica(f"Se esperaban {S} pesos, llegaron {w.size}.")
    if S == 0 or w.sum() <= 0:
        return SolverReport(
            policy=TransmitPolicy(np.zeros(S), M),
            objective_value=0.0,
            dual_variable=0.0,
            kkt_residual=0.0,
            iterations=0,
            degenerate=True,
            multiplicadores=np.zeros(S),
        )

    activos = w > 0
    c = (conflicts.primaria.T.astype(float) @ w)[activos]
    d = (conflicts.secundaria.T.astype(float) @ w)[activos]
    a = w[activos]
    A = np.eye(S) + conflicts.matriz_total.astype(float)
    A_act = A[:, activos]

    nu = np.zeros(S)
    t = np.full(a.size, 0.5)
    tau = np.zeros(S)
    convergio = False
    residuos = {}
    k = 0
    for k in range(1, tolerancias.max_iters + 1):
        rho = A_act.T @ nu
        t = _maximizar_lagrangiano(t, a, c, d, rho, M)
        tau[activos] = t
        exceso = A @ tau - M
        g1, _ = _derivadas(t, a, c, d, rho, M)
        residuos = {
            "factibilidad": max(0.0, float(exceso.max())),
            "holgura_complementaria": float(np.abs(nu * exceso).max()),
            "estacionariedad": float(_residuo_proyectado(t, g1).max(initial=0.0)),
        }
        if (
            residuos["factibilidad"] <= tolerancias.tol_feas
            and residuos["holgura_complementaria"] <= tolerancias.tol_stat
            and residuos["estacionariedad"] <= tolerancias.tol_stat
        ):
            convergio = True
            break
        nu = np.maximum(0.0, nu + tolerancias.alpha0 / math.sqrt(k) * exceso)

    if not convergio:
        logger.warning(f"⚠️ El subgradiente dual no convergió en {tolerancias.max_iters} iteraciones: {residuos}")
    politica = TransmitPolicy(tau, M)
    return SolverReport(
        policy=politica,
        objective_value=objective(net, conflicts, w, politica),
        dual_variable=float(nu.max(initial=0.0)),
        kkt_residual=max(residuos.values()),
        iterations=k,
        converged=convergio,
        multiplicadores=nu,
        residuos=residuos,
    )


def solver_por_topologia(net, conflicts, tolerancias=None):
    """Devuelve pesos -> SolverReport, usando la forma cerrada si la red es estrella."""
    canales = star_channels(net, conflicts)
    if canales is not None:
        def resolver(pesos):
            reporte = solve_star(pesos, canales, tolerancias)
            reporte.policy = TransmitPolicy(reporte.policy.tau, net.channel_count)
            return reporte
    else:
        def resolver(pesos):
            return solve_general(net, conflicts, pesos, net.channel_count, tolerancias)
    return resolver


# 🔍 Autotest de concavidad

@dataclass
class ReporteConcavidad:
    paso: bool
    ensayos: int
    violaciones: int
    peor_violacion: float
    peor_error_hessiano: float


def concavity_selftest(net, conflicts, weights, trials, seed=0, epsilon=1e-4, umbral=1e-8):
    """Segunda diferencia direccional de F y diagonal del hessiano de cada Rᵢ."""
    if trials < 1:
        raise ValueError("trials debe ser ≥ 1.")
    w = _como_pesos(weights)
    S = net.link_count
    rng = np.random.default_rng(seed)
    peor_violacion = -math.inf
    peor_error = 0.0
    violaciones = 0
    if S == 0:
        return ReporteConcavidad(True, trials, 0, 0.0, 0.0)

    for _ in range(trials):
        tau = rng.uniform(0.05, 0.95, size=S)
        direccion = rng.normal(size=S)
        direccion /= np.linalg.norm(direccion)
        centro = objective(net, conflicts, w, tau)
        segunda = (
            objective(net, conflicts, w, tau + epsilon * direccion)
            - 2 * centro
            + objective(net, conflicts, w, tau - epsilon * direccion)
        ) / epsilon**2
        peor_violacion = max(peor_violacion, segunda)
        if segunda > umbral:
            violaciones += 1

        enlace = int(rng.integers(S))
        analitica = hessian_diagonal(net, conflicts, tau, enlace)
        for j in np.flatnonzero(analitica):
            numerica = _segunda_parcial_log_mu(net, conflicts, tau, enlace, j)
            error = abs(numerica - analitica[j]) / max(abs(analitica[j]), 1e-3)
            peor_error = max(peor_error, error)

    paso = violaciones == 0 and peor_error <= 1e-3
    if not paso:
        logger.warning(f"⚠️ Autotest de concavidad falló: {violaciones} violaciones, error hessiano {peor_error:.3g}")
    return ReporteConcavidad(paso, trials, violaciones, float(peor_violacion), float(peor_error))


def _segunda_parcial_log_mu(net, conflicts, tau, enlace, j, h=1e-4):
    def log_mu(t):
        return math.log(link_success_probs(net, conflicts, t)[enlace])

    arriba, abajo = tau.copy(), tau.copy()
    arriba[j] += h
    abajo[j] -= h
    return (log_mu(arriba) - 2 * log_mu(tau) + log_mu(abajo)) / h**2
