# src/nav/errors.py
# Excepciones del paquete. Heredan de builtins para que el server las trate igual que
# cualquier ValueError/RuntimeError y el CLI pueda mapearlas a códigos de salida.


class NavConfigError(ValueError):
    """Configuración inválida (archivo key=value, RunConfig, dominio del PPF)."""


class LandmarkError(ValueError):
    """Menos de 3 landmarks emparejados o M̄ sin rango suficiente."""


class CsvSchemaError(ValueError):
    """CSV con columnas faltantes, filas mal formadas o tiempos no monótonos."""


class DivergenceError(RuntimeError):
    """El filtro salió del dominio numérico (rotación irrecuperable o errores > límite)."""
