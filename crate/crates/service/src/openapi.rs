use serde_json::{json, Map, Value};

use mugrep::appraisal::{AppraisalEngine, SEARCH_LIMIT};
use mugrep::data::{AttributeKind, Schema};

/// OpenAPI 3 description. When an engine is loaded, the estate attribute
/// form is spelled out from the dataset schema so clients can render it.
pub fn openapi(engine: Option<&AppraisalEngine>) -> Value {
    let attributes = engine.map_or_else(
        || json!({ "type": "object", "additionalProperties": true }),
        |e| attribute_schema(&e.dataset().schema),
    );
    let error = json!({ "$ref": "#/components/schemas/Error" });
    json!({
        "openapi": "3.0.3",
        "info": { "title": "MugRep appraisal service", "version": env!("CARGO_PKG_VERSION") },
        "paths": {
            "/api/health": { "get": {
                "summary": "Readiness and dataset counts",
                "responses": { "200": { "description": "ready" }, "503": { "description": "loading", "content": { "application/json": { "schema": error } } } }
            }},
            "/api/communities": { "get": {
                "summary": format!("Case-insensitive name search, at most {SEARCH_LIMIT} results"),
                "parameters": [{ "name": "q", "in": "query", "required": true, "schema": { "type": "string" } }],
                "responses": { "200": { "description": "matches ordered by match position, then id" }, "400": { "description": "empty query" } }
            }},
            "/api/communities/{id}": { "get": {
                "summary": "Community profile with recent price statistics",
                "parameters": [{ "name": "id", "in": "path", "required": true, "schema": { "type": "integer" } }],
                "responses": { "200": { "description": "detail" }, "404": { "description": "unknown community" } }
            }},
            "/api/appraise": { "post": {
                "summary": "Estimate the unit price of a property",
                "requestBody": { "required": true, "content": { "application/json": { "schema": { "$ref": "#/components/schemas/AppraisalRequest" } } } },
                "responses": {
                    "200": { "description": "estimate" },
                    "404": { "description": "unknown community" },
                    "422": { "description": "invalid attribute, named in `field`" }
                }
            }},
            "/api/spec": { "get": { "summary": "This document", "responses": { "200": { "description": "OpenAPI" } } } }
        },
        "components": { "schemas": {
            "EstateAttributes": attributes,
            "AppraisalRequest": {
                "type": "object",
                "required": ["community_id", "attributes"],
                "properties": {
                    "community_id": { "type": "integer" },
                    "valuation_date": { "type": "integer", "description": "days since epoch; defaults to the day after the newest sale" },
                    "attributes": { "$ref": "#/components/schemas/EstateAttributes" }
                }
            },
            "Error": {
                "type": "object",
                "required": ["code", "message"],
                "properties": { "code": { "type": "string" }, "message": { "type": "string" }, "field": { "type": "string" } }
            }
        }}
    })
}

fn attribute_schema(schema: &Schema) -> Value {
    let mut props = Map::new();
    for spec in &schema.estate_attributes {
        let v = match spec.kind {
            AttributeKind::Numeric => {
                let mut v = json!({ "type": "number" });
                if let Some(min) = spec.min {
                    v["minimum"] = json!(min);
                }
                if spec.positive {
                    v["exclusiveMinimum"] = json!(true);
                    v["minimum"] = json!(0.0);
                }
                v
            }
            AttributeKind::Categorical => json!({ "type": "string", "enum": spec.values }),
        };
        props.insert(spec.name.clone(), v);
    }
    let required: Vec<&str> = schema.estate_attributes.iter().map(|s| s.name.as_str()).collect();
    json!({
        "type": "object",
        "required": required,
        "additionalProperties": false,
        "properties": props
    })
}
