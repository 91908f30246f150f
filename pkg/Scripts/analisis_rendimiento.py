# 📊 Rendimiento analítico de la estrella de recolección
#
# K = número de nodos que transmiten en una ranura, Poisson-binomial en τ.
# Con M canales elegidos al azar, un transmisor tiene éxito si ninguno de los
# otros k−1 eligió su canal: (1 − 1/M)^(k−1).
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
import statsmodels.api as sm

from Scripts.errores import ErrorNumerico, ErrorPolitica
from Scripts.optimizacion_equidad import link_success_probs, success_given_attempt

logger = logging.getLogger(__name__)

TOL_IMAGINARIA = 1e-10
TOL_NEGATIVOS = 1e-12


def _validar_tau(tau):
    tau = np.asarray(tau, dtype=float).reshape(-1)
    if np.any(~np.isfinite(tau)) or np.any(tau < 0) or np.any(tau > 1):
        raise ErrorPolitica("Cada τⱼ debe estar en [0, 1].")
    return tau


@dataclass(frozen=True)
class DiscreteDistribution:
    pmf: np.ndarray

    def __getitem__(self, k):
        return self.pmf[k]

    def __len__(self):
        return self.pmf.size

    @property
    def mean(self):
        return float(np.arange(self.pmf.size) @ self.pmf)


def poisson_binomial(tau):
    """pmf de K por la función característica evaluada en N+1 puntos y su DFT inversa."""
    tau = _validar_tau(tau)
    N = tau.size
    if N == 0:
        return DiscreteDistribution(np.ones(1))
    omega = 2 * np.pi / (N + 1)
    l = np.arange(N + 1)
    z = np.exp(1j * omega * l)
    D = np.prod(1 - tau[None, :] + tau[None, :] * z[:, None], axis=1)
    fase = np.exp(-1j * omega * (np.outer(l, l) % (N + 1)))
    pmf = (D @ fase) / (N + 1)

    residuo = np.abs(pmf.imag).max()
    if residuo > TOL_IMAGINARIA:
        raise ErrorNumerico(f"Residuo imaginario {residuo:.3g} en la DFT de la Poisson-binomial.")
    pmf = pmf.real
    if pmf.min() < -TOL_NEGATIVOS:
        raise ErrorNumerico(f"pmf con valor negativo {pmf.min():.3g} más allá del redondeo.")
    pmf = np.clip(pmf, 0.0, None)
    return DiscreteDistribution(pmf / pmf.sum())


def poisson_binomial_dp(tau):
    """Convolución directa de Bernoullis; oráculo de la versión por DFT."""
    pmf = np.ones(1)
    for t in _validar_tau(tau):
        pmf = np.convolve(pmf, [1 - t, t])
    return DiscreteDistribution(pmf)


def system_throughput(tau, M):
    pmf = poisson_binomial(tau).pmf
    k = np.arange(1, pmf.size)
    # 0⁰ = 1 en numpy, así M = 1 conserva el término k = 1
    return float(np.sum(pmf[1:] * k * (1 - 1 / M) ** (k - 1)))


def tagged_success_prob(tau, M, node):
    tau = _validar_tau(tau)
    if not 0 <= node < tau.size:
        raise IndexError(f"Nodo {node} fuera de rango [0, {tau.size}).")
    pmf = poisson_binomial(np.delete(tau, node)).pmf
    return min(1.0, float(np.sum(pmf * (1 - 1 / M) ** np.arange(pmf.size))))


def service_moments(tau_i, p_i):
    """Servicio Geométrico(τp): (S̄, S̄²); (inf, inf) si el nodo nunca tiene éxito."""
    q = tau_i * p_i
    if not 0 <= q <= 1:
        raise ErrorPolitica(f"τ·p = {q} fuera de [0, 1].")
    if q == 0:
        return math.inf, math.inf
    return 1 / q, (2 - q) / q**2


def es_estable(lambda_i, mean_service):
    return bool(lambda_i == 0 or lambda_i * mean_service < 1)


def total_delay(lambda_i, mean_service, second_moment):
    """Pollaczek-Khinchin; math.inf marca una cola inestable."""
    if lambda_i < 0:
        raise ValueError("λ debe ser no negativo.")
    if lambda_i == 0:
        return float(mean_service)
    if not es_estable(lambda_i, mean_service):
        return math.inf
    rho = lambda_i * mean_service
    return mean_service + lambda_i * second_moment / (2 * (1 - rho))


def collisions_and_energy(p, e_tx=1.0):
    if e_tx <= 0:
        raise ValueError("E_tx debe ser positivo.")
    if not 0 <= p <= 1:
        raise ErrorPolitica(f"p = {p} fuera de [0, 1].")
    if p == 0:
        return math.inf, math.inf
    return 1 / p - 1, e_tx / p


def collision_prob_per_failure(tau_i, p_i):
    """Fracción de ranuras fallidas que son colisión y no diferimiento."""
    fallo = 1 - tau_i * p_i
    if fallo == 0:
        return 0.0
    return tau_i * (1 - p_i) / fallo


def _exito_etiquetado(tau, M):
    return np.array([tagged_success_prob(tau, M, i) for i in range(tau.size)])


def effective_load_success(tau, lambdas, M, max_iters=500, tol=1e-12):
    """Punto fijo con intentos condicionados a cola no vacía.

    Cada nodo ocupa el canal con probabilidad τⱼ·ρⱼ, ρⱼ = min(1, λⱼ·S̄ⱼ). Devuelve
    (p, tau_efectivo); el servicio de un paquete presente sigue usando τ nominal.
    """
    tau = _validar_tau(tau)
    lam = np.broadcast_to(np.asarray(lambdas, dtype=float), tau.shape)
    tau_ef = tau.copy()
    p = _exito_etiquetado(tau_ef, M)
    for _ in range(max_iters):
        q = tau * p
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = np.where(lam == 0, 0.0, np.where(q > 0, np.minimum(1.0, lam / q), 1.0))
        nuevo = 0.5 * tau_ef + 0.5 * tau * rho
        p = _exito_etiquetado(nuevo, M)
        if np.max(np.abs(nuevo - tau_ef), initial=0.0) < tol:
            tau_ef = nuevo
            break
        tau_ef = nuevo
    else:
        logger.warning("⚠️ El punto fijo de carga efectiva no alcanzó la tolerancia.")
    return p, tau_ef


@dataclass
class PerfReport:
    tau: np.ndarray
    lambdas: np.ndarray
    throughput: float
    success_prob: np.ndarray
    mean_service: np.ndarray
    second_moment_service: np.ndarray
    delay: np.ndarray
    stable: np.ndarray
    expected_collisions: np.ndarray
    energy_per_success: np.ndarray

    def to_frame(self):
        return pd.DataFrame(
            {
                "nodo": np.arange(1, self.tau.size + 1),
                "tau": self.tau,
                "lambda": self.lambdas,
                "p": self.success_prob,
                "servicio_medio": self.mean_service,
                "servicio_2do_momento": self.second_moment_service,
                "retardo": self.delay,
                "estable": self.stable,
                "colisiones": self.expected_collisions,
                "energia": self.energy_per_success,
                "throughput": self.throughput,
            }
        )


def perf_report(tau, M, lambdas=None, e_tx=1.0, load="saturated"):
    tau = _validar_tau(tau)
    lam = np.zeros(tau.size) if lambdas is None else np.broadcast_to(np.asarray(lambdas, dtype=float), tau.shape)
    if np.any(lam < 0):
        raise ValueError("Las tasas de llegada deben ser no negativas.")

    if load == "saturated":
        p = _exito_etiquetado(tau, M)
        throughput = system_throughput(tau, M)
    elif load == "effective":
        p, tau_ef = effective_load_success(tau, lam, M)
        throughput = system_throughput(tau_ef, M)
    else:
        raise ValueError(f"Carga desconocida: {load}")

    momentos = [service_moments(t, pi) for t, pi in zip(tau, p)]
    media = np.array([m[0] for m in momentos])
    segundo = np.array([m[1] for m in momentos])
    retardo = np.array([total_delay(l, s, s2) for l, s, s2 in zip(lam, media, segundo)])
    costos = [collisions_and_energy(pi, e_tx) for pi in p]

    return PerfReport(
        tau=tau,
        lambdas=np.array(lam),
        throughput=throughput,
        success_prob=p,
        mean_service=media,
        second_moment_service=segundo,
        delay=retardo,
        stable=np.array([es_estable(l, s) for l, s in zip(lam, media)]),
        expected_collisions=np.array([c[0] for c in costos]),
        energy_per_success=np.array([c[1] for c in costos]),
    )


def link_perf_report(net, conflicts, policy, lambdas=None, e_tx=1.0):
    """Tabla por enlace para topologías generales: p = μ/τ sin ley de retardo."""
    tau = policy.tau
    p = success_given_attempt(net, conflicts, policy)
    mu = link_success_probs(net, conflicts, policy)
    lam = np.zeros(tau.size) if lambdas is None else np.broadcast_to(np.asarray(lambdas, dtype=float), tau.shape)
    costos = [collisions_and_energy(pi, e_tx) for pi in p]
    with np.errstate(divide="ignore"):
        servicio = np.where(mu > 0, 1 / np.where(mu > 0, mu, 1), np.inf)
    return pd.DataFrame(
        {
            "enlace": np.arange(net.link_count),
            "origen": net.origenes,
            "destino": net.destinos,
            "tau": tau,
            "lambda": lam,
            "p": p,
            "mu": mu,
            "servicio_medio": servicio,
            "estable": lam < mu,
            "colisiones": [c[0] for c in costos],
            "energia": [c[1] for c in costos],
        }
    )


# 📈 Formas de curva (figuras de barrido)

@dataclass(frozen=True)
class AjusteLogaritmico:
    pendiente: float
    intercepto: float
    r2: float


def log_fit(lambdas, values, escala=None):
    """OLS de valores contra ln(1 + escala·λ); escala por defecto 1/λ̄."""
    lam = np.asarray(lambdas, dtype=float)
    escala = escala if escala is not None else 1 / lam.mean()
    X = sm.add_constant(np.log1p(escala * lam), has_constant="add")
    resultado = sm.OLS(np.asarray(values, dtype=float), X).fit()
    intercepto, pendiente = resultado.params
    return AjusteLogaritmico(float(pendiente), float(intercepto), float(resultado.rsquared))


def second_differences(x, y):
    """Segundas diferencias divididas sobre x ordenado (admite grilla irregular)."""
    orden = np.argsort(x)
    x = np.asarray(x, dtype=float)[orden]
    y = np.asarray(y, dtype=float)[orden]
    pendientes = np.diff(y) / np.diff(x)
    return np.diff(pendientes) / ((x[2:] - x[:-2]) / 2)


def saturation_spread(T, N, M, start=None):
    """(max − min)/max de T sobre N ≥ start (por defecto N ≥ M)."""
    T = np.asarray(T, dtype=float)
    N = np.asarray(N)
    cola = T[N >= (M if start is None else start)]
    if cola.size == 0 or cola.max() == 0:
        return 0.0
    return float((cola.max() - cola.min()) / cola.max())
