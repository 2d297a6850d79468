mod common;

use std::fs;

use narrative_core::prompt::{
    render_datagen, render_explanation_prompt, render_step1, render_step2, render_step3, PromptTemplate,
    TEMPLATES,
};
use serde_json::Value;

fn golden(name: &str) -> String {
    fs::read_to_string(common::fixture(&format!("golden/{name}.txt"))).unwrap()
}

fn inputs() -> Value {
    serde_json::from_str(&fs::read_to_string(common::fixture("golden/inputs.json")).unwrap()).unwrap()
}

fn pairs(v: &Value) -> Vec<(String, String)> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|e| (e[0].as_str().unwrap().to_string(), e[1].as_str().unwrap().to_string()))
        .collect()
}

fn names(v: &Value) -> Vec<String> {
    v.as_array().unwrap().iter().map(|e| e.as_str().unwrap().to_string()).collect()
}

fn s<'a>(v: &'a Value, key: &str) -> &'a str {
    v[key].as_str().unwrap()
}

#[test]
fn step1_matches_golden() {
    let i = &inputs()["step1"];
    assert_eq!(render_step1(s(i, "document_text")).unwrap(), golden("step1"));
}

#[test]
fn step2_matches_golden() {
    let i = &inputs()["step2"];
    let out = render_step2(s(i, "category"), &pairs(&i["narratives"]), s(i, "document_text")).unwrap();
    assert_eq!(out, golden("step2"));
}

#[test]
fn step3_matches_golden() {
    let i = &inputs()["step3"];
    let out = render_step3(
        s(i, "category"),
        s(i, "main_narrative"),
        &pairs(&i["subnarratives"]),
        s(i, "document_text"),
    )
    .unwrap();
    assert_eq!(out, golden("step3"));
}

#[test]
fn datagen_matches_golden() {
    let i = &inputs()["datagen"];
    let out = render_datagen(s(i, "category"), s(i, "sub_narrative"), s(i, "explanation")).unwrap();
    assert_eq!(out, golden("datagen"));
}

#[test]
fn explanation_prompt_matches_golden() {
    let i = &inputs()["explain"];
    let out = render_explanation_prompt(&names(&i["main_narratives"]), &names(&i["sub_narratives"])).unwrap();
    assert_eq!(out, golden("explain"));
}

#[test]
fn rendered_prompts_have_no_leftover_placeholders() {
    for t in TEMPLATES {
        let bindings: Vec<(&str, &str)> = t.placeholders().into_iter().map(|p| (p, "VALUE")).collect();
        let out = t.render(&bindings).unwrap();
        for p in t.placeholders() {
            assert!(!out.contains(&format!("{{{p}}}")), "{} left {p}", t.name);
        }
    }
}

#[test]
fn placeholder_text_inside_values_is_not_reexpanded() {
    let t = PromptTemplate::get(narrative_core::prompt::TemplateName::Datagen);
    let out = t
        .render(&[("category", "{sub_narrative}"), ("sub_narrative", "X"), ("explanation", "E")])
        .unwrap();
    assert!(out.contains("{sub_narrative}"));
}
