import logging
import math
from pathlib import Path

import numpy as np
import pytest

from Scripts.errores import ErrorEscenario
from Scripts.escenarios import load_scenario, parse_scenario

DATA = Path(__file__).resolve().parent.parent / "data"

MINIMO = """
topologia:
  tipo: estrella
  N: 4
M: 2
"""


@pytest.mark.parametrize("archivo", sorted(DATA.glob("*.yaml")), ids=lambda p: p.name)
def test_escenarios_incluidos_son_validos(archivo):
    escenario = load_scenario(archivo)
    assert len(escenario.huella) == 12


def test_defaults_del_escenario_minimo():
    escenario = parse_scenario(MINIMO)
    assert escenario.M == 2
    assert escenario.pesos == {"fuente": "iguales", "valor": 1.0}
    assert escenario.tau is None
    assert escenario.barrido is None
    assert escenario.simulacion["modo"] == "saturado"
    assert escenario.simulacion["ranuras"] == 100_000
    assert escenario.simulacion["semilla"] == 1
    assert escenario.tolerancias().alpha0 == 0.1
    assert escenario.salida["ruta"] is None
    net = escenario.construir_red()
    assert net.link_count == 4
    assert net.channel_count == 2


def test_huella_depende_del_texto():
    a = parse_scenario(MINIMO)
    b = parse_scenario(MINIMO + "# comentario\n")
    assert a.huella != b.huella
    assert a == b


def test_escenario_homogeneo():
    escenario = load_scenario(DATA / "escenario_homogeneo.yaml")
    net = escenario.construir_red()
    pesos = escenario.pesos_para(net.link_count)
    assert net.link_count == 86
    assert pesos.w == pytest.approx(np.full(86, math.log(1.2)))
    assert escenario.solucion["curva_dual"] == {"gamma_max": 2.0, "puntos": 41}


def test_lambda_uniforme_reproducible():
    escenario = load_scenario(DATA / "escenario_heterogeneo.yaml")
    a = escenario.tasas_llegada(86)
    b = escenario.tasas_llegada(86)
    assert np.array_equal(a, b)
    assert np.all((a >= 0) & (a <= 0.2))
    assert escenario.pesos_para(86).w == pytest.approx(np.log1p(0.5 * a))


def test_lambda_escalar_y_lista():
    escalar = parse_scenario(MINIMO + "lambda: 0.05\n")
    assert escalar.tasas_llegada(4) == pytest.approx(np.full(4, 0.05))
    lista = parse_scenario(MINIMO + "lambda: [0.1, 0.2]\n")
    with pytest.raises(ErrorEscenario) as error:
        lista.tasas_llegada(4)
    assert error.value.campo == "lambda"


def test_barrido_con_rango_de_n():
    escenario = load_scenario(DATA / "barrido_throughput.yaml")
    assert escenario.barrido["N"] == list(range(1, 31))
    assert escenario.barrido["M"] == [5, 10, 15]
    assert escenario.barrido["politicas"] == ["optima", "sin_control"]
    assert escenario.barrido["lambda"] is None


def test_barrido_escalar():
    escenario = parse_scenario(MINIMO + "barrido:\n  N: 7\n  M: 3\n")
    assert escenario.barrido["N"] == [7]
    assert escenario.barrido["M"] == [3]
    assert escenario.construir_red(N=7, M=3).link_count == 7


def test_tau_fuera_de_dominio_se_acepta_al_parsear():
    escenario = parse_scenario(MINIMO + "tau: 1.5\n")
    assert escenario.tau == 1.5


def test_politica_fija():
    escenario = parse_scenario(MINIMO + "tau: [0.1, 0.2, 0.3, 0.4]\n")
    assert escenario.politica_fija(4).tau == pytest.approx([0.1, 0.2, 0.3, 0.4])
    with pytest.raises(ErrorEscenario):
        escenario.politica_fija(3)


def test_con_semilla_reemplaza_simulacion_y_validacion():
    escenario = parse_scenario(MINIMO).con_semilla(42)
    assert escenario.simulacion["semilla"] == 42
    assert escenario.validacion["semilla"] == 42
    assert escenario.sim_config(4).semilla == 42
    with pytest.raises(ErrorEscenario):
        parse_scenario(MINIMO).con_semilla(-3)


def test_topologia_explicita():
    texto = """
topologia:
  tipo: explicita
  nodos: 3
  relevos: {1: [0], 2: [1]}
  interferencia: {0: [1], 1: [0, 2], 2: [1]}
M: 1
"""
    net = parse_scenario(texto).construir_red()
    assert net.links == ((1, 0), (2, 1))


def test_topologia_explicita_invalida_se_reporta_como_escenario():
    texto = """
topologia:
  tipo: explicita
  nodos: 2
  relevos: {1: [0]}
  interferencia: {0: [], 1: []}
M: 1
"""
    with pytest.raises(ErrorEscenario) as error:
        parse_scenario(texto).construir_red()
    assert error.value.campo == "topologia"


@pytest.mark.parametrize(
    "extra, campo, linea",
    [
        ("simulacion:\n  ranuras: 0\n", "simulacion.ranuras", 7),
        ("simulacion:\n  modo: turbo\n", "simulacion.modo", 7),
        ("simulacion:\n  ranura: 10\n", "simulacion.ranura", 7),
        ("desconocida: 1\n", "desconocida", 6),
        ("pesos:\n  fuente: explicitos\n  w: [1, -2]\n", "pesos.w[1]", 8),
        ("lambda: {min: 0.3, max: 0.1}\n", "lambda.max", 6),
        ("barrido:\n  N: [5, 2]\n  M: 1\n", "barrido.N", 7),
        ("solucion:\n  alpha0: 0\n", "solucion.alpha0", 7),
    ],
)
def test_errores_con_campo_y_linea(extra, campo, linea):
    with pytest.raises(ErrorEscenario) as error:
        parse_scenario(MINIMO + extra)
    assert error.value.campo == campo
    assert error.value.linea == linea
    assert f"(línea {linea})" in str(error.value)


def test_m_obligatorio():
    with pytest.raises(ErrorEscenario) as error:
        parse_scenario("topologia:\n  tipo: estrella\n  N: 3\n")
    assert error.value.campo == "M"


def test_fuente_tasas_requiere_lambda():
    with pytest.raises(ErrorEscenario) as error:
        parse_scenario(MINIMO + "pesos:\n  fuente: tasas\n")
    assert error.value.campo == "pesos.fuente"


def test_yaml_mal_formado():
    with pytest.raises(ErrorEscenario) as error:
        parse_scenario("topologia: [1, 2\nM: 1\n")
    assert error.value.linea is not None


def test_archivo_inexistente(tmp_path):
    with pytest.raises(ErrorEscenario, match="no se encontró"):
        load_scenario(tmp_path / "no_existe.yaml")


def test_tolerancias_del_escenario_llegan_a_la_simulacion():
    escenario = parse_scenario(MINIMO + "simulacion:\n  modo: adaptativo\nsolucion:\n  alpha0: 1.0\n  max_iters: 500\n")
    config = escenario.sim_config(4)
    assert config.tolerancias == escenario.tolerancias()
    assert config.tolerancias.alpha0 == 1.0
    assert config.tolerancias.max_iters == 500


def test_eco_del_escenario_en_info(caplog):
    with caplog.at_level(logging.INFO, logger="Scripts.escenarios"):
        escenario = parse_scenario(MINIMO)
    assert any(escenario.huella in r.getMessage() and r.levelno == logging.INFO for r in caplog.records)
