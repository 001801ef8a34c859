# Geometry package initialization
