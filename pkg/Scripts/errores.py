# ⚠️ Excepciones propias del proyecto
#
# Todo lo que la CLI puede reportar con "❌ Error: ..." hereda de ErrorTSCH.
# Las condiciones que el modelo trata como valores (cola inestable, servicio
# infinito, objetivo -inf) NO se señalan con excepciones.


class ErrorTSCH(Exception):
    """Base de los errores del paquete."""


class ErrorTopologia(ErrorTSCH, ValueError):
    """Topología inválida: relevos, interferencia o índices de enlace."""


class ErrorPolitica(ErrorTSCH, ValueError):
    """Vector de probabilidades τ fuera de dominio o de dimensión incorrecta."""


class ErrorNumerico(ErrorTSCH, ArithmeticError):
    """Residuo numérico mayor al tolerado (p.ej. pmf con negativos grandes)."""


class ErrorEscenario(ErrorTSCH, ValueError):
    """Archivo de escenario mal formado, con campo y línea cuando se conocen."""

    def __init__(self, mensaje, campo=None, linea=None):
        self.campo = campo
        self.linea = linea
        prefijo = ""
        if campo:
            prefijo += f"[{campo}] "
        if linea is not None:
            prefijo += f"(línea {linea}) "
        super().__init__(prefijo + mensaje)


class ErrorConvergencia(ErrorTSCH, RuntimeError):
    """El optimizador agotó max_iters; lleva el reporte parcial."""

    def __init__(self, mensaje, reporte=None):
        self.reporte = reporte
        super().__init__(mensaje)
