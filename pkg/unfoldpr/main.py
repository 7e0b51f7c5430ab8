"""
This module is the main module for the FastAPI service.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

from fastapi import FastAPI, Request
from fastapi.openapi.utils import get_openapi
from fastapi.responses import JSONResponse

from unfoldpr import __version__
from unfoldpr.routers import api, root
from unfoldpr.utils.exceptions import NotFoundException, RuntimeFailure, ValidationError


# --------------------------------------------------------------------------------
# App Creation
# --------------------------------------------------------------------------------

app = FastAPI()
app.include_router(root.router)
app.include_router(api.router)


# --------------------------------------------------------------------------------
# Exception Handlers
# --------------------------------------------------------------------------------

@app.exception_handler(NotFoundException)
async def not_found_exception_handler(request: Request, exc: NotFoundException):
  return JSONResponse({'detail': str(exc)}, status_code=404)


@app.exception_handler(ValidationError)
async def validation_exception_handler(request: Request, exc: ValidationError):
  return JSONResponse({'detail': str(exc)}, status_code=422)


@app.exception_handler(RuntimeFailure)
async def runtime_exception_handler(request: Request, exc: RuntimeFailure):
  return JSONResponse({'detail': str(exc)}, status_code=500)


# --------------------------------------------------------------------------------
# OpenAPI Customization
# --------------------------------------------------------------------------------

def custom_openapi():
  if app.openapi_schema:
    return app.openapi_schema

  description = \
    """Phase retrieval service.
    Lists trained unfolded ADMM models, samples their learned metrics,
    and reconstructs uploaded audio with Griffin-Lim, ADMM or a stored model.
    """

  openapi_schema = get_openapi(
    title="unfoldpr",
    version=__version__,
    description=description,
    routes=app.routes,
    tags=[
      {
        "name": "API",
        "description": "Models, learned metrics and reconstruction.",
      },
      {
        "name": "Pages",
        "description": "Redirects.",
      },
    ]
  )

  app.openapi_schema = openapi_schema
  return app.openapi_schema


app.openapi = custom_openapi
