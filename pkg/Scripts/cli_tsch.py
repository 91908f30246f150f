# 🖥️ Línea de órdenes: solve | analyze | simulate | sweep | validate
#
#   python -m Scripts.cli_tsch solve --scenario data/escenario_homogeneo.yaml --out data/solucion.csv
#
# Códigos de salida: 0 éxito, 1 uso/parseo, 2 no convergencia, 3 validación fallida.
import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from Scripts.analisis_rendimiento import link_perf_report, perf_report
from Scripts.errores import ErrorEscenario, ErrorTSCH
from Scripts.escenarios import load_scenario
from Scripts.modelo_red_tsch import conflict_sets, star_channels
from Scripts.optimizacion_equidad import (
    TransmitPolicy,
    link_success_probs,
    solve_general,
    solve_star,
    solver_por_topologia,
    star_dual_curve,
    weights_from_rates,
)
from Scripts.salida_csv import escribir_tabla, resolver_ruta, ruta_derivada
from Scripts.simulador_aloha import run, run_replications
from Scripts.validacion import validar

logger = logging.getLogger(__name__)

EXITO = 0
ERROR_USO = 1
NO_CONVERGE = 2
VALIDACION_FALLIDA = 3
VARIABLE_PROCESOS = "TSCH_PROCESOS"


@dataclass
class Resultado:
    tabla: pd.DataFrame
    codigo: int = EXITO
    adicionales: dict = field(default_factory=dict)


def _red(escenario, N=None, M=None):
    net = escenario.construir_red(N, M)
    return net, conflict_sets(net)


def _resolver(escenario, net, conflicts, pesos):
    canales = star_channels(net, conflicts)
    if canales is not None:
        reporte = solve_star(pesos, canales, escenario.tolerancias())
        return replace(reporte, policy=TransmitPolicy(reporte.policy.tau, net.channel_count))
    return solve_general(net, conflicts, pesos, net.channel_count, escenario.tolerancias())


def _politica(escenario, net, conflicts):
    """τ fijo del escenario o, si no hay, el óptimo para sus pesos."""
    fija = escenario.politica_fija(net.link_count, net.channel_count)
    if fija is not None:
        return fija, True
    reporte = _resolver(escenario, net, conflicts, escenario.pesos_para(net.link_count))
    return reporte.policy, reporte.converged


def _carga(escenario, lambdas):
    sim = escenario.simulacion
    condicionada = sim["modo"] != "saturado" and not (sim["modo"] == "en_cola" and sim["contencion"] == "persistente")
    return "effective" if condicionada and np.any(lambdas > 0) else "saturated"


# ⚙️ Órdenes

def cmd_solve(escenario):
    net, conflicts = _red(escenario)
    if net.link_count == 0:
        raise ErrorEscenario("la red no tiene enlaces", campo="topologia")
    pesos = escenario.pesos_para(net.link_count)
    reporte = _resolver(escenario, net, conflicts, pesos)
    tabla = pd.DataFrame(
        {
            "indice": np.arange(net.link_count),
            "origen": net.origenes,
            "destino": net.destinos,
            "w": pesos.w,
            "tau": reporte.policy.tau,
            "mu": link_success_probs(net, conflicts, reporte.policy),
            "objetivo": reporte.objective_value,
            "gamma": reporte.dual_variable,
            "residuo_kkt": reporte.kkt_residual,
            "iteraciones": reporte.iterations,
            "convergio": reporte.converged,
        }
    )
    logger.info(f"⚖️ Objetivo {reporte.objective_value:.6g}, γ* = {reporte.dual_variable:.6g}")
    adicionales = {}
    curva = escenario.solucion["curva_dual"]
    canales = star_channels(net, conflicts)
    if curva is not None:
        if canales is None:
            logger.warning("⚠️ La curva dual sólo está disponible para topologías estrella.")
        else:
            gammas = np.linspace(0.0, curva["gamma_max"], curva["puntos"])
            adicionales["dual"] = star_dual_curve(pesos, canales, gammas)
    if not reporte.converged:
        logger.error(f"❌ El solver no convergió (residuo KKT {reporte.kkt_residual:.3g}).")
    return Resultado(tabla, EXITO if reporte.converged else NO_CONVERGE, adicionales)


def cmd_analyze(escenario):
    net, conflicts = _red(escenario)
    politica, convergio = _politica(escenario, net, conflicts)
    lambdas = escenario.tasas_llegada(net.link_count)
    e_tx = escenario.simulacion["e_tx"]
    canales = star_channels(net, conflicts)
    if canales is not None:
        reporte = perf_report(politica.tau, canales, lambdas, e_tx, load=_carga(escenario, lambdas))
        tabla = reporte.to_frame()
        logger.info(f"📊 Throughput analítico T = {reporte.throughput:.6g} paquetes/ranura")
        inestables = int((~reporte.stable).sum())
        if inestables:
            logger.warning(f"⚠️ {inestables} nodos con cola inestable (retardo = inf).")
    else:
        tabla = link_perf_report(net, conflicts, politica, lambdas, e_tx)
        logger.info(f"📊 Throughput analítico Σμ = {tabla['mu'].sum():.6g} paquetes/ranura")
    return Resultado(tabla, EXITO if convergio else NO_CONVERGE)


def _analitico_por_metrica(escenario, net, conflicts, politica, lambdas):
    canales = star_channels(net, conflicts)
    e_tx = escenario.simulacion["e_tx"]
    if canales is not None:
        rep = perf_report(politica.tau, canales, lambdas, e_tx, load=_carga(escenario, lambdas))
        p, servicio, retardo, sistema = rep.success_prob, rep.mean_service, rep.delay, rep.throughput
    else:
        tabla = link_perf_report(net, conflicts, politica, lambdas, e_tx)
        p = tabla["p"].to_numpy()
        servicio = retardo = np.full(net.link_count, np.nan)
        sistema = float(tabla["mu"].sum())
    with np.errstate(divide="ignore"):
        por_exito = np.where(p > 0, 1 / np.where(p > 0, p, 1), np.inf)
    return {
        "throughput": np.array([sistema]),
        "p_empirica": p,
        "intentos_por_exito": por_exito,
        "energia_por_exito": por_exito * e_tx,
        "servicio_medio": servicio,
        "permanencia_media": retardo,
    }


def cmd_simulate(escenario, replicaciones=None, workers=None):
    net, conflicts = _red(escenario)
    S = net.link_count
    config = escenario.sim_config(S)
    replicaciones = replicaciones or escenario.simulacion["replicaciones"]
    politica, convergio = (None, True) if config.modo == "adaptativo" and escenario.tau is None else _politica(
        escenario, net, conflicts
    )
    agregado = run_replications(net, conflicts, politica, config, replicaciones, workers)
    tabla = agregado.tabla
    if config.modo == "adaptativo":
        tabla["analitico"] = np.nan
        fallas = sum(t.no_convergencias for t in agregado.trazas)
        convergio = convergio and fallas == 0
    else:
        analitico = _analitico_por_metrica(escenario, net, conflicts, politica, config.tasas_llegada)
        tabla["analitico"] = [
            analitico[m][max(e, 0)] if m in analitico else np.nan for m, e in zip(tabla["metrica"], tabla["enlace"])
        ]
    throughput = tabla.loc[tabla["metrica"] == "throughput", "media"].iloc[0]
    logger.info(f"🎲 {replicaciones} réplicas × {config.ranuras} ranuras: throughput medio {throughput:.6g}")
    return Resultado(tabla, EXITO if convergio else NO_CONVERGE)


def _evaluar_punto(argumentos):
    escenario, N, M, lam, politica = argumentos
    net, conflicts = _red(escenario, N, M)
    S = net.link_count
    tasas = np.full(S, lam) if lam is not None else escenario.tasas_llegada(S)
    convergio = True
    if politica == "optima":
        if escenario.pesos["fuente"] == "tasas":
            pesos = weights_from_rates(tasas, escenario.pesos["factor_cola"])
        else:
            pesos = escenario.pesos_para(S)
        reporte = solver_por_topologia(net, conflicts, escenario.tolerancias())(pesos)
        tau, convergio = reporte.policy.tau, reporte.converged
    else:
        tau = np.ones(S)
    politica_tx = TransmitPolicy(tau, M)
    e_tx = escenario.simulacion["e_tx"]
    fila = {"N": N, "M": M, "lambda": float(np.mean(tasas)), "politica": politica, "tau_medio": float(tau.mean())}

    canales = star_channels(net, conflicts)
    if canales is not None:
        rep = perf_report(tau, canales, tasas, e_tx)
        fila.update(
            throughput_analitico=rep.throughput,
            p_medio=float(rep.success_prob.mean()),
            servicio_medio=float(rep.mean_service.mean()),
            retardo_medio=float(rep.delay.mean()),
            colisiones_medias=float(rep.expected_collisions.mean()),
            energia_media=float(rep.energy_per_success.mean()),
            estable=bool(rep.stable.all()),
        )
    else:
        tabla = link_perf_report(net, conflicts, politica_tx, tasas, e_tx)
        fila.update(
            throughput_analitico=float(tabla["mu"].sum()),
            p_medio=float(tabla["p"].mean()),
            servicio_medio=float(tabla["servicio_medio"].mean()),
            retardo_medio=np.nan,
            colisiones_medias=float(tabla["colisiones"].mean()),
            energia_media=float(tabla["energia"].mean()),
            estable=bool(tabla["estable"].all()),
        )

    if escenario.barrido["simular"]:
        config = replace(escenario.sim_config(S), tasas_llegada=tasas)
        traza = run(net, conflicts, politica_tx, config)
        permanencias = np.concatenate(traza.permanencias)
        fila.update(
            throughput_simulado=traza.throughput_empirico,
            intentos_por_exito_simulado=traza.intentos.sum() / traza.exitos_totales if traza.exitos_totales else np.inf,
            permanencia_simulada=float(permanencias.mean()) if permanencias.size else np.nan,
        )
        fila["energia_simulada"] = fila["intentos_por_exito_simulado"] * e_tx
    fila["convergio"] = convergio
    return fila


def cmd_sweep(escenario, workers=None):
    barrido = escenario.barrido
    if barrido is None:
        raise ErrorEscenario("la orden sweep requiere la sección 'barrido'", campo="barrido")
    puntos = [
        (escenario, N, M, lam, politica)
        for politica in barrido["politicas"]
        for M in barrido["M"]
        for N in barrido["N"]
        for lam in (barrido["lambda"] or [None])
    ]
    logger.info(f"📅 Barrido de {len(puntos)} puntos")
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            filas = list(executor.map(_evaluar_punto, puntos))
    else:
        filas = [_evaluar_punto(p) for p in puntos]
    tabla = pd.DataFrame(filas)
    return Resultado(tabla, EXITO if tabla["convergio"].all() else NO_CONVERGE)


def cmd_validate(escenario):
    tabla = validar(escenario)
    return Resultado(tabla, EXITO if tabla["paso"].all() else VALIDACION_FALLIDA)


# 🧰 Argumentos y arranque

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ERROR_USO, f"❌ Error: {message}\n")


def _entero_no_negativo(texto):
    valor = int(texto)
    if valor < 0:
        raise argparse.ArgumentTypeError("debe ser ≥ 0")
    return valor


def _entero_positivo(texto):
    valor = int(texto)
    if valor < 1:
        raise argparse.ArgumentTypeError("debe ser ≥ 1")
    return valor


def construir_parser():
    parser = _Parser(prog="cli_tsch", description="Equidad proporcional en redes TSCH (aloha ranurado multicanal)")
    parser.add_argument("orden", choices=["solve", "analyze", "simulate", "sweep", "validate"])
    parser.add_argument("--scenario", required=True, help="Archivo YAML del escenario")
    parser.add_argument("--out", help="Ruta del CSV de salida (por defecto salida.ruta o stdout)")
    parser.add_argument("--seed", type=_entero_no_negativo, help="Reemplaza la semilla del escenario")
    parser.add_argument("--replications", type=_entero_positivo, help="Réplicas de la simulación")
    parser.add_argument("--workers", type=_entero_positivo, help=f"Procesos del pool (o {VARIABLE_PROCESOS})")
    verbosidad = parser.add_mutually_exclusive_group()
    verbosidad.add_argument("-v", "--verbose", action="store_true")
    verbosidad.add_argument("-q", "--quiet", action="store_true")
    return parser


def configurar_logging(verbose=False, quiet=False):
    nivel = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=nivel, format="%(message)s", stream=sys.stderr, force=True)
    for ruidoso in ("matplotlib", "numexpr"):
        logging.getLogger(ruidoso).setLevel(logging.WARNING)


def _workers(args):
    if args.workers:
        return args.workers
    entorno = os.environ.get(VARIABLE_PROCESOS)
    return int(entorno) if entorno and entorno.isdigit() and int(entorno) > 0 else None


def main(argv=None):
    args = construir_parser().parse_args(argv)
    configurar_logging(args.verbose, args.quiet)
    try:
        escenario = load_scenario(args.scenario)
        if args.seed is not None:
            escenario = escenario.con_semilla(args.seed)
        if args.orden == "solve":
            resultado = cmd_solve(escenario)
        elif args.orden == "analyze":
            resultado = cmd_analyze(escenario)
        elif args.orden == "simulate":
            resultado = cmd_simulate(escenario, args.replications, _workers(args))
        elif args.orden == "sweep":
            resultado = cmd_sweep(escenario, _workers(args))
        else:
            resultado = cmd_validate(escenario)
    except ErrorTSCH as e:
        logger.error(f"❌ Error: {e}")
        return ERROR_USO

    semilla = escenario.validacion["semilla"] if args.orden == "validate" else escenario.simulacion["semilla"]
    ruta = resolver_ruta(args.out or escenario.salida["ruta"])
    escribir_tabla(resultado.tabla, escenario.huella, semilla, ruta)
    for sufijo, tabla in resultado.adicionales.items():
        if ruta is None:
            logger.warning(f"⚠️ La tabla '{sufijo}' requiere --out o salida.ruta; se omite.")
            continue
        escribir_tabla(tabla, escenario.huella, semilla, ruta_derivada(ruta, sufijo))
    return resultado.codigo


if __name__ == "__main__":
    sys.exit(main())
