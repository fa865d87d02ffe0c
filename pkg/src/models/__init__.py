# Data models, schemas and errors
