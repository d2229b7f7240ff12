# src/nav/__init__.py
# Filtro de navegación no lineal estocástico sobre SE2(3) con desempeño prescrito.
