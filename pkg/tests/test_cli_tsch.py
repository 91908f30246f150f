import numpy as np
import pandas as pd
import pytest

from Scripts.cli_tsch import ERROR_USO, EXITO, NO_CONVERGE, VALIDACION_FALLIDA, main
from Scripts.salida_csv import VARIABLE_DIR_SALIDA

ESTRELLA_86 = """
topologia:
  tipo: estrella
  N: 86
M: 15
solucion:
  curva_dual:
    gamma_max: 2.0
    puntos: 5
"""

ESTRELLA_CHICA = """
topologia:
  tipo: estrella
  N: 5
M: 2
simulacion:
  ranuras: 2000
  replicaciones: 2
validacion:
  ensayos: 3
"""

TRES_SECUNDARIOS = """
topologia:
  tipo: explicita
  nodos: 6
  relevos: {1: [0], 3: [2], 5: [4]}
  interferencia: {0: [1, 3, 5], 1: [0], 2: [3], 3: [0, 2], 4: [5], 5: [0, 4]}
M: 1
solucion:
  max_iters: 1
"""

BARRIDO = """
topologia:
  tipo: estrella
  N: 1
M: 2
barrido:
  N: [1, 4]
  M: [2]
  politicas: [optima, sin_control]
"""


@pytest.fixture
def escribir(tmp_path):
    def _escribir(texto, nombre="escenario.yaml"):
        ruta = tmp_path / nombre
        ruta.write_text(texto, encoding="utf-8")
        return str(ruta)

    return _escribir


def _leer(ruta):
    return pd.read_csv(ruta, comment="#")


def test_solve_escribe_tabla_y_curva_dual(escribir, tmp_path):
    salida = tmp_path / "solucion.csv"
    assert main(["solve", "--scenario", escribir(ESTRELLA_86), "--out", str(salida)]) == EXITO
    primera = salida.read_text(encoding="utf-8").splitlines()[0]
    assert primera.startswith("# escenario=")
    assert primera.endswith("semilla=1")
    tabla = _leer(salida)
    assert list(tabla.columns) == [
        "indice", "origen", "destino", "w", "tau", "mu", "objetivo",
        "gamma", "residuo_kkt", "iteraciones", "convergio",
    ]
    assert len(tabla) == 86
    assert tabla["tau"].to_numpy() == pytest.approx(np.full(86, 15 / 86), abs=1e-11)
    assert tabla["convergio"].all()
    dual = _leer(tmp_path / "solucion_dual.csv")
    assert list(dual.columns) == ["gamma", "dual"]
    assert len(dual) == 5


def test_salida_reproducible_byte_a_byte(escribir, tmp_path):
    escenario = escribir(ESTRELLA_CHICA)
    for nombre in ("a.csv", "b.csv"):
        assert main(["simulate", "--scenario", escenario, "--out", str(tmp_path / nombre)]) == EXITO
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_semilla_de_linea_de_ordenes(escribir, tmp_path):
    salida = tmp_path / "sim.csv"
    main(["simulate", "--scenario", escribir(ESTRELLA_CHICA), "--out", str(salida), "--seed", "7"])
    assert salida.read_text(encoding="utf-8").splitlines()[0].endswith("semilla=7")


def test_simulate_agrega_columna_analitica(escribir, tmp_path):
    salida = tmp_path / "sim.csv"
    assert main(["simulate", "--scenario", escribir(ESTRELLA_CHICA), "--out", str(salida)]) == EXITO
    tabla = _leer(salida)
    fila = tabla[tabla["metrica"] == "throughput"].iloc[0]
    assert fila["analitico"] == pytest.approx(5 * 0.4 * 0.8**4)
    assert fila["media"] == pytest.approx(fila["analitico"], rel=0.1)


def test_analyze_sin_ruta_escribe_en_stdout(escribir, capsys):
    assert main(["analyze", "--scenario", escribir(ESTRELLA_CHICA)]) == EXITO
    salida = capsys.readouterr().out
    assert salida.startswith("# escenario=")
    assert "servicio_2do_momento" in salida.splitlines()[1]


def test_directorio_de_salida_por_entorno(escribir, tmp_path, monkeypatch):
    destino = tmp_path / "resultados"
    monkeypatch.setenv(VARIABLE_DIR_SALIDA, str(destino))
    texto = ESTRELLA_86 + "salida:\n  ruta: otra/carpeta/solucion.csv\n"
    assert main(["solve", "--scenario", escribir(texto)]) == EXITO
    assert (destino / "solucion.csv").exists()
    assert (destino / "solucion_dual.csv").exists()


def test_no_convergencia_sale_con_2(escribir, tmp_path):
    salida = tmp_path / "solucion.csv"
    assert main(["solve", "--scenario", escribir(TRES_SECUNDARIOS), "--out", str(salida)]) == NO_CONVERGE
    assert not _leer(salida)["convergio"].any()


def test_validacion_fallida_sale_con_3(escribir, tmp_path):
    salida = tmp_path / "validacion.csv"
    texto = ESTRELLA_CHICA + "tau: 1.5\n"
    assert main(["validate", "--scenario", escribir(texto), "--out", str(salida)]) == VALIDACION_FALLIDA
    tabla = _leer(salida)
    assert not tabla.loc[tabla["chequeo"] == "dominio_tau", "paso"].iloc[0]


def test_validacion_superada(escribir, tmp_path):
    salida = tmp_path / "validacion.csv"
    assert main(["validate", "--scenario", escribir(ESTRELLA_CHICA), "--out", str(salida)]) == EXITO
    assert _leer(salida)["paso"].all()


def test_errores_de_escenario_salen_con_1(escribir, tmp_path):
    assert main(["solve", "--scenario", str(tmp_path / "no_existe.yaml")]) == ERROR_USO
    assert main(["solve", "--scenario", escribir(ESTRELLA_CHICA + "sobrante: 1\n")]) == ERROR_USO
    assert main(["sweep", "--scenario", escribir(ESTRELLA_CHICA)]) == ERROR_USO


@pytest.mark.parametrize(
    "argumentos",
    [["bailar", "--scenario", "x.yaml"], ["solve"], ["simulate", "--scenario", "x.yaml", "--replications", "0"]],
)
def test_argumentos_invalidos_salen_con_1(argumentos):
    with pytest.raises(SystemExit) as salida:
        main(argumentos)
    assert salida.value.code == ERROR_USO


def test_sweep_throughput(escribir, tmp_path):
    salida = tmp_path / "barrido.csv"
    assert main(["sweep", "--scenario", escribir(BARRIDO), "--out", str(salida)]) == EXITO
    tabla = _leer(salida)
    assert len(tabla) == 8
    optima = tabla[tabla["politica"] == "optima"].set_index("N")["throughput_analitico"]
    sin_control = tabla[tabla["politica"] == "sin_control"].set_index("N")["throughput_analitico"]
    assert sin_control[3] == pytest.approx(0.75)
    assert optima[3] == pytest.approx(8 / 9)
    assert np.all(optima.to_numpy() >= sin_control.to_numpy() - 1e-12)


def test_sweep_paralelo_igual_al_serial(escribir, tmp_path):
    escenario = escribir(BARRIDO)
    main(["sweep", "--scenario", escenario, "--out", str(tmp_path / "serial.csv")])
    main(["sweep", "--scenario", escenario, "--out", str(tmp_path / "paralelo.csv"), "--workers", "2"])
    assert (tmp_path / "serial.csv").read_bytes() == (tmp_path / "paralelo.csv").read_bytes()


def test_simulate_adaptativo_usa_la_seccion_solucion(escribir, tmp_path):
    texto = TRES_SECUNDARIOS + "simulacion:\n  modo: adaptativo\n  ranuras: 400\n  epoca: 200\nlambda: 0.05\n"
    salida = tmp_path / "sim.csv"
    assert main(["simulate", "--scenario", escribir(texto), "--out", str(salida)]) == NO_CONVERGE
    assert salida.exists()
