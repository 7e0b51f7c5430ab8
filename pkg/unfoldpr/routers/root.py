"""
This module provides the root route.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

from fastapi import APIRouter
from fastapi.responses import RedirectResponse


# --------------------------------------------------------------------------------
# Router
# --------------------------------------------------------------------------------

router = APIRouter()


# --------------------------------------------------------------------------------
# Routes
# --------------------------------------------------------------------------------

@router.get(
  path="/",
  summary="Redirects to the API docs",
  tags=["Pages"]
)
async def read_root():
  return RedirectResponse('/docs', status_code=302)
