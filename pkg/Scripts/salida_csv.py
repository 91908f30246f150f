# 💾 Escritura de tablas: línea de comentario con huella + semilla, luego CSV
import logging
import os
import sys

logger = logging.getLogger(__name__)

FORMATO_REAL = "%.12g"
VARIABLE_DIR_SALIDA = "TSCH_DIR_SALIDA"


def resolver_ruta(ruta):
    """Si TSCH_DIR_SALIDA está definida, conserva el nombre y cambia el directorio."""
    directorio = os.environ.get(VARIABLE_DIR_SALIDA)
    if ruta and directorio:
        return os.path.join(directorio, os.path.basename(ruta))
    return ruta


def ruta_derivada(ruta, sufijo):
    base, extension = os.path.splitext(ruta)
    return f"{base}_{sufijo}{extension or '.csv'}"


def formatear_tabla(tabla, huella, semilla):
    cuerpo = tabla.to_csv(index=False, float_format=FORMATO_REAL, lineterminator="\n")
    return f"# escenario={huella} semilla={semilla}\n{cuerpo}"


def escribir_tabla(tabla, huella, semilla, ruta=None):
    """Escribe en `ruta` (ya resuelta) o en stdout si es None; devuelve la ruta usada."""
    texto = formatear_tabla(tabla, huella, semilla)
    if ruta is None:
        sys.stdout.write(texto)
        return None
    directorio = os.path.dirname(ruta)
    if directorio:
        os.makedirs(directorio, exist_ok=True)
    if os.path.exists(ruta):
        logger.info(f"⚠️ El archivo '{ruta}' ya existía y será sobrescrito.")
    with open(ruta, "w", encoding="utf-8", newline="") as archivo:
        archivo.write(texto)
    logger.info(f"✅ Tabla de {len(tabla)} filas guardada en '{ruta}'")
    return ruta
