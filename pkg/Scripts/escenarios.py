# 📁 Escenarios YAML: parseo, validación con ruta/línea y construcción de objetos
import hashlib
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from Scripts.errores import ErrorEscenario, ErrorPolitica, ErrorTopologia
from Scripts.modelo_red_tsch import build_network, chain_network, random_network, star_network
from Scripts.optimizacion_equidad import (
    FACTOR_COLA,
    Tolerancias,
    TransmitPolicy,
    WeightVector,
    weights_from_queues,
    weights_from_rates,
)
from Scripts.simulador_aloha import (
    BLOQUE_POR_DEFECTO,
    CONTENCIONES,
    EPOCA_POR_DEFECTO,
    MODOS,
    RANURAS_POR_DEFECTO,
    SEMILLA_POR_DEFECTO,
    SimConfig,
)

logger = logging.getLogger(__name__)

CLAVES = {
    "": {"topologia", "M", "pesos", "tau", "lambda", "simulacion", "solucion", "barrido", "validacion", "salida"},
    "topologia": {
        "tipo", "N", "sumidero_multicanal", "densidad", "semilla",
        "nodos", "relevos", "interferencia", "sumideros_multicanal",
    },
    "pesos": {"fuente", "valor", "w", "Q", "factor_cola"},
    "simulacion": {"modo", "ranuras", "semilla", "replicaciones", "epoca", "e_tx", "contencion", "cola_inicial", "bloque"},
    "solucion": {"tol_feas", "tol_stat", "max_iters", "alpha0", "curva_dual"},
    "solucion.curva_dual": {"gamma_max", "puntos"},
    "barrido": {"N", "M", "lambda", "politicas", "simular"},
    "validacion": {"ensayos", "semilla"},
    "salida": {"ruta"},
    "lambda": {"distribucion", "min", "max", "semilla"},
}
TIPOS_TOPOLOGIA = ("estrella", "cadena", "aleatoria", "explicita")
FUENTES_PESOS = ("iguales", "explicitos", "colas", "tasas")
POLITICAS_BARRIDO = ("optima", "sin_control")
ENSAYOS_POR_DEFECTO = 20


@dataclass(frozen=True)
class Scenario:
    topologia: dict
    M: int
    pesos: dict
    tau: object
    lambdas: object
    simulacion: dict
    solucion: dict
    barrido: dict
    validacion: dict
    salida: dict
    huella: str = field(default="", compare=False)

    # 🌐 Red

    def construir_red(self, N=None, M=None):
        topo = self.topologia
        M = int(M or self.M)
        N = int(N if N is not None else topo.get("N", 0))
        try:
            if topo["tipo"] == "estrella":
                return star_network(N, M, topo.get("sumidero_multicanal", True))
            if topo["tipo"] == "cadena":
                return chain_network(N, M)
            if topo["tipo"] == "aleatoria":
                return random_network(N, M, topo["densidad"], topo["semilla"], topo.get("sumidero_multicanal", False))
            return build_network(
                topo["nodos"], M, topo["relevos"], topo["interferencia"], topo.get("sumideros_multicanal", ())
            )
        except ErrorTopologia as e:
            raise ErrorEscenario(str(e), campo="topologia") from e

    # ⚖️ Pesos, tasas y política fija

    def tasas_llegada(self, S):
        lam = self.lambdas
        if isinstance(lam, dict):
            rng = np.random.default_rng(lam["semilla"])
            return rng.uniform(lam["min"], lam["max"], size=S)
        lam = np.asarray(lam, dtype=float)
        if lam.ndim == 0:
            return np.full(S, float(lam))
        if lam.size != S:
            raise ErrorEscenario(f"se esperaban {S} tasas, hay {lam.size}", campo="lambda")
        return lam

    def pesos_para(self, S):
        fuente = self.pesos["fuente"]
        if fuente == "iguales":
            return WeightVector(np.full(S, self.pesos["valor"]))
        if fuente == "explicitos":
            return self._vector_de_largo(self.pesos["w"], S, "pesos.w", WeightVector)
        if fuente == "colas":
            Q = self._vector_de_largo(self.pesos["Q"], S, "pesos.Q", np.asarray)
            return weights_from_queues(Q)
        return weights_from_rates(self.tasas_llegada(S), self.pesos["factor_cola"])

    def politica_fija(self, S, M=None):
        if self.tau is None:
            return None
        tau = np.asarray(self.tau, dtype=float)
        tau = np.full(S, float(tau)) if tau.ndim == 0 else tau
        if tau.size != S:
            raise ErrorEscenario(f"se esperaban {S} valores de τ, hay {tau.size}", campo="tau")
        return TransmitPolicy(tau, M or self.M)

    @staticmethod
    def _vector_de_largo(valores, S, campo, constructor):
        if len(valores) != S:
            raise ErrorEscenario(f"se esperaban {S} valores, hay {len(valores)}", campo=campo)
        try:
            return constructor(valores)
        except ErrorPolitica as e:
            raise ErrorEscenario(str(e), campo=campo) from e

    # ⚙️ Simulación y solver

    def sim_config(self, S):
        sim = self.simulacion
        if isinstance(sim["cola_inicial"], list) and len(sim["cola_inicial"]) != S:
            raise ErrorEscenario(f"se esperaban {S} colas iniciales", campo="simulacion.cola_inicial")
        return SimConfig(
            modo=sim["modo"],
            ranuras=sim["ranuras"],
            semilla=sim["semilla"],
            tasas_llegada=self.tasas_llegada(S),
            longitud_epoca=sim["epoca"],
            e_tx=sim["e_tx"],
            contencion=sim["contencion"],
            cola_inicial=sim["cola_inicial"],
            bloque=sim["bloque"],
            tolerancias=self.tolerancias(),
        )

    def tolerancias(self):
        sol = self.solucion
        return Tolerancias(sol["tol_feas"], sol["tol_stat"], sol["max_iters"], sol["alpha0"])

    def con_semilla(self, semilla):
        """Semilla de `--seed`: reemplaza la de simulación y la de validación."""
        if int(semilla) != semilla or not 0 <= semilla < 2**64:
            raise ErrorEscenario("la semilla debe ser un entero sin signo de 64 bits", campo="--seed")
        return replace(
            self,
            simulacion={**self.simulacion, "semilla": int(semilla)},
            validacion={**self.validacion, "semilla": int(semilla)},
        )

    def eco(self):
        return {
            "topologia": self.topologia,
            "M": self.M,
            "pesos": self.pesos,
            "tau": self.tau,
            "lambda": self.lambdas,
            "simulacion": self.simulacion,
            "solucion": self.solucion,
            "barrido": self.barrido,
            "validacion": self.validacion,
            "salida": self.salida,
        }


# 🧭 Líneas del documento

def _mapa_lineas(nodo, ruta="", lineas=None):
    lineas = {} if lineas is None else lineas
    if isinstance(nodo, yaml.MappingNode):
        for clave, valor in nodo.value:
            nombre = f"{ruta}.{clave.value}" if ruta else str(clave.value)
            lineas[nombre] = clave.start_mark.line + 1
            _mapa_lineas(valor, nombre, lineas)
    elif isinstance(nodo, yaml.SequenceNode):
        for i, valor in enumerate(nodo.value):
            nombre = f"{ruta}[{i}]"
            lineas[nombre] = valor.start_mark.line + 1
            _mapa_lineas(valor, nombre, lineas)
    return lineas


class _Validador:
    def __init__(self, lineas):
        self.lineas = lineas

    def error(self, mensaje, campo):
        return ErrorEscenario(mensaje, campo=campo, linea=self.lineas.get(campo))

    def seccion(self, datos, ruta, obligatoria=False):
        if datos is None:
            if obligatoria:
                raise self.error("sección obligatoria ausente", ruta)
            return {}
        if not isinstance(datos, dict):
            raise self.error("se esperaba un mapa de claves", ruta)
        desconocidas = sorted(str(k) for k in datos if k not in CLAVES[ruta])
        if desconocidas:
            campo = f"{ruta}.{desconocidas[0]}" if ruta else desconocidas[0]
            raise self.error(f"clave desconocida '{desconocidas[0]}'", campo)
        return datos

    def entero(self, valor, campo, minimo=None):
        if isinstance(valor, bool) or not isinstance(valor, int):
            if isinstance(valor, float) and valor.is_integer():
                valor = int(valor)
            else:
                raise self.error(f"se esperaba un entero, llegó {valor!r}", campo)
        if minimo is not None and valor < minimo:
            raise self.error(f"debe ser ≥ {minimo} (recibido {valor})", campo)
        return valor

    def real(self, valor, campo, minimo=None, positivo=False):
        if isinstance(valor, bool) or not isinstance(valor, (int, float)):
            raise self.error(f"se esperaba un número, llegó {valor!r}", campo)
        valor = float(valor)
        if not np.isfinite(valor):
            raise self.error("debe ser finito", campo)
        if positivo and valor <= 0:
            raise self.error(f"debe ser positivo (recibido {valor})", campo)
        if minimo is not None and valor < minimo:
            raise self.error(f"debe ser ≥ {minimo} (recibido {valor})", campo)
        return valor

    def booleano(self, valor, campo):
        if not isinstance(valor, bool):
            raise self.error(f"se esperaba true/false, llegó {valor!r}", campo)
        return valor

    def opcion(self, valor, campo, opciones):
        if valor not in opciones:
            raise self.error(f"valor '{valor}' no admitido; opciones: {', '.join(opciones)}", campo)
        return valor

    def lista(self, valor, campo, elemento, no_vacia=True):
        if not isinstance(valor, list):
            raise self.error("se esperaba una lista", campo)
        if no_vacia and not valor:
            raise self.error("la lista no puede estar vacía", campo)
        return [elemento(v, f"{campo}[{i}]") for i, v in enumerate(valor)]

    def escalar_o_lista(self, valor, campo, elemento):
        if isinstance(valor, list):
            return self.lista(valor, campo, elemento)
        return elemento(valor, campo)

    def conjuntos(self, valor, campo):
        if isinstance(valor, dict):
            return {
                self.entero(k, f"{campo}.{k}", 0): self.lista(v or [], f"{campo}.{k}", self._nodo, no_vacia=False)
                for k, v in valor.items()
            }
        if not isinstance(valor, list):
            raise self.error("se esperaba un mapa nodo -> lista o una lista por nodo", campo)
        return [self.lista(v or [], f"{campo}[{i}]", self._nodo, no_vacia=False) for i, v in enumerate(valor)]

    def _nodo(self, valor, campo):
        return self.entero(valor, campo, 0)


# 🔍 Parseo

def parse_scenario(text):
    """Valida el documento YAML completo y devuelve un Scenario con defaults."""
    try:
        raiz = yaml.compose(text)
        datos = yaml.safe_load(text)
    except yaml.YAMLError as e:
        marca = getattr(e, "problem_mark", None)
        raise ErrorEscenario(f"YAML mal formado: {getattr(e, 'problem', e)}", linea=marca.line + 1 if marca else None)
    v = _Validador(_mapa_lineas(raiz) if raiz is not None else {})
    datos = v.seccion(datos, "", obligatoria=True)
    if "M" not in datos:
        raise v.error("clave obligatoria ausente", "M")

    escenario = Scenario(
        topologia=_parsear_topologia(v, datos.get("topologia")),
        M=v.entero(datos["M"], "M", 1),
        pesos=_parsear_pesos(v, datos.get("pesos")),
        tau=_parsear_tau(v, datos.get("tau")),
        lambdas=_parsear_lambda(v, datos.get("lambda", 0.0)),
        simulacion=_parsear_simulacion(v, datos.get("simulacion")),
        solucion=_parsear_solucion(v, datos.get("solucion")),
        barrido=_parsear_barrido(v, datos.get("barrido")),
        validacion=_parsear_validacion(v, datos.get("validacion")),
        salida=_parsear_salida(v, datos.get("salida")),
        huella=hashlib.sha256(text.encode("utf-8")).hexdigest()[:12],
    )
    if escenario.pesos["fuente"] == "tasas" and "lambda" not in datos:
        raise v.error("la fuente 'tasas' requiere 'lambda'", "pesos.fuente")
    logger.info(f"📋 Escenario {escenario.huella}: {escenario.eco()}")
    return escenario


def load_scenario(ruta):
    try:
        with open(ruta, encoding="utf-8") as archivo:
            return parse_scenario(archivo.read())
    except FileNotFoundError:
        raise ErrorEscenario(f"no se encontró el archivo {ruta}") from None


def _parsear_topologia(v, datos):
    topo = v.seccion(datos, "topologia", obligatoria=True)
    if "tipo" not in topo:
        raise v.error("clave obligatoria ausente", "topologia.tipo")
    tipo = v.opcion(topo["tipo"], "topologia.tipo", TIPOS_TOPOLOGIA)
    resultado = {"tipo": tipo}
    if tipo in ("estrella", "cadena", "aleatoria"):
        resultado["N"] = v.entero(topo.get("N"), "topologia.N", 1)
    if tipo == "estrella":
        resultado["sumidero_multicanal"] = v.booleano(topo.get("sumidero_multicanal", True), "topologia.sumidero_multicanal")
    if tipo == "aleatoria":
        densidad = v.real(topo.get("densidad"), "topologia.densidad", 0.0)
        if densidad > 1:
            raise v.error("debe estar en [0, 1]", "topologia.densidad")
        resultado["densidad"] = densidad
        resultado["semilla"] = v.entero(topo.get("semilla", SEMILLA_POR_DEFECTO), "topologia.semilla", 0)
        resultado["sumidero_multicanal"] = v.booleano(topo.get("sumidero_multicanal", False), "topologia.sumidero_multicanal")
    if tipo == "explicita":
        resultado["nodos"] = v.entero(topo.get("nodos"), "topologia.nodos", 1)
        resultado["relevos"] = v.conjuntos(topo.get("relevos", {}), "topologia.relevos")
        resultado["interferencia"] = v.conjuntos(topo.get("interferencia", {}), "topologia.interferencia")
        resultado["sumideros_multicanal"] = v.lista(
            topo.get("sumideros_multicanal", []), "topologia.sumideros_multicanal", v._nodo, no_vacia=False
        )
    return resultado


def _parsear_pesos(v, datos):
    pesos = v.seccion(datos, "pesos")
    fuente = v.opcion(pesos.get("fuente", "iguales"), "pesos.fuente", FUENTES_PESOS)
    resultado = {"fuente": fuente}
    if fuente == "iguales":
        resultado["valor"] = v.real(pesos.get("valor", 1.0), "pesos.valor", 0.0)
    elif fuente == "explicitos":
        resultado["w"] = v.lista(pesos.get("w"), "pesos.w", lambda x, c: v.real(x, c, 0.0))
    elif fuente == "colas":
        resultado["Q"] = v.lista(pesos.get("Q"), "pesos.Q", lambda x, c: v.real(x, c, 0.0))
    else:
        resultado["factor_cola"] = v.real(pesos.get("factor_cola", FACTOR_COLA), "pesos.factor_cola", positivo=True)
    return resultado


def _parsear_tau(v, datos):
    # el dominio [0, 1] se chequea en 'validate'; aquí sólo el tipo
    if datos is None:
        return None
    return v.escalar_o_lista(datos, "tau", lambda x, c: v.real(x, c))


def _parsear_lambda(v, datos):
    if isinstance(datos, dict):
        dist = v.seccion(datos, "lambda")
        v.opcion(dist.get("distribucion", "uniforme"), "lambda.distribucion", ("uniforme",))
        minimo = v.real(dist.get("min", 0.0), "lambda.min", 0.0)
        maximo = v.real(dist.get("max"), "lambda.max", 0.0)
        if maximo < minimo:
            raise v.error("max debe ser ≥ min", "lambda.max")
        semilla = v.entero(dist.get("semilla", SEMILLA_POR_DEFECTO), "lambda.semilla", 0)
        return {"distribucion": "uniforme", "min": minimo, "max": maximo, "semilla": semilla}
    return v.escalar_o_lista(datos, "lambda", lambda x, c: v.real(x, c, 0.0))


def _parsear_simulacion(v, datos):
    sim = v.seccion(datos, "simulacion")
    cola = sim.get("cola_inicial", 0)
    return {
        "modo": v.opcion(sim.get("modo", "saturado"), "simulacion.modo", MODOS),
        "ranuras": v.entero(sim.get("ranuras", RANURAS_POR_DEFECTO), "simulacion.ranuras", 1),
        "semilla": v.entero(sim.get("semilla", SEMILLA_POR_DEFECTO), "simulacion.semilla", 0),
        "replicaciones": v.entero(sim.get("replicaciones", 1), "simulacion.replicaciones", 1),
        "epoca": v.entero(sim.get("epoca", EPOCA_POR_DEFECTO), "simulacion.epoca", 1),
        "e_tx": v.real(sim.get("e_tx", 1.0), "simulacion.e_tx", positivo=True),
        "contencion": v.opcion(sim.get("contencion", "condicionada"), "simulacion.contencion", CONTENCIONES),
        "cola_inicial": v.escalar_o_lista(cola, "simulacion.cola_inicial", lambda x, c: v.entero(x, c, 0)),
        "bloque": v.entero(sim.get("bloque", BLOQUE_POR_DEFECTO), "simulacion.bloque", 1),
    }


def _parsear_solucion(v, datos):
    sol = v.seccion(datos, "solucion")
    defecto = Tolerancias()
    resultado = {
        "tol_feas": v.real(sol.get("tol_feas", defecto.tol_feas), "solucion.tol_feas", positivo=True),
        "tol_stat": v.real(sol.get("tol_stat", defecto.tol_stat), "solucion.tol_stat", positivo=True),
        "max_iters": v.entero(sol.get("max_iters", defecto.max_iters), "solucion.max_iters", 1),
        "alpha0": v.real(sol.get("alpha0", defecto.alpha0), "solucion.alpha0", positivo=True),
        "curva_dual": None,
    }
    if sol.get("curva_dual") is not None:
        curva = v.seccion(sol["curva_dual"], "solucion.curva_dual")
        resultado["curva_dual"] = {
            "gamma_max": v.real(curva.get("gamma_max", 2.0), "solucion.curva_dual.gamma_max", positivo=True),
            "puntos": v.entero(curva.get("puntos", 41), "solucion.curva_dual.puntos", 2),
        }
    return resultado


def _parsear_barrido(v, datos):
    if datos is None:
        return None
    barrido = v.seccion(datos, "barrido")
    if "N" not in barrido or "M" not in barrido:
        raise v.error("el barrido requiere N y M", "barrido")
    N = v.escalar_o_lista(barrido["N"], "barrido.N", lambda x, c: v.entero(x, c, 1))
    if isinstance(N, list) and len(N) == 2:
        if N[1] < N[0]:
            raise v.error("rango vacío: fin < inicio", "barrido.N")
        N = list(range(N[0], N[1] + 1))
    resultado = {
        "N": N if isinstance(N, list) else [N],
        "M": v.escalar_o_lista(barrido["M"], "barrido.M", lambda x, c: v.entero(x, c, 1)),
        "lambda": None,
        "politicas": v.lista(
            barrido.get("politicas", ["optima"]),
            "barrido.politicas",
            lambda x, c: v.opcion(x, c, POLITICAS_BARRIDO),
        ),
        "simular": v.booleano(barrido.get("simular", False), "barrido.simular"),
    }
    if not isinstance(resultado["M"], list):
        resultado["M"] = [resultado["M"]]
    if barrido.get("lambda") is not None:
        resultado["lambda"] = v.escalar_o_lista(barrido["lambda"], "barrido.lambda", lambda x, c: v.real(x, c, 0.0))
        if not isinstance(resultado["lambda"], list):
            resultado["lambda"] = [resultado["lambda"]]
    return resultado


def _parsear_validacion(v, datos):
    val = v.seccion(datos, "validacion")
    return {
        "ensayos": v.entero(val.get("ensayos", ENSAYOS_POR_DEFECTO), "validacion.ensayos", 1),
        "semilla": v.entero(val.get("semilla", SEMILLA_POR_DEFECTO), "validacion.semilla", 0),
    }


def _parsear_salida(v, datos):
    salida = v.seccion(datos, "salida")
    ruta = salida.get("ruta")
    if ruta is not None and not isinstance(ruta, str):
        raise v.error("se esperaba una ruta de texto", "salida.ruta")
    return {"ruta": ruta}
